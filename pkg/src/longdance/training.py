"""Training loop, feature normalization, window sampling, and checkpoints.

Each step samples a batch of conditioning windows, noises only the future
segment at a uniformly drawn diffusion step, runs the denoiser, and
optimizes the combined objective (reconstruction + mutual-information
regularizer + motion perceptual terms) with Adam. Everything is seeded, so
one seed gives a bit-identical loss log on one device.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig
from .dataio import DatasetManifest, read_motion
from .denoiser import DenoiserConfig, DenoiserNet
from .diffusion import NoiseSchedule, make_schedule, q_sample, sample_window
from .losses import LossWeights, mi_loss, perceptual_losses, recon_loss, summarize_features, total_loss
from .motion import FrameLayout, MotionSequence
from .music import MusicFeatureSequence, ingest_features
from .skeleton import Skeleton, load_skeleton

CHECKPOINT_FORMAT_VERSION = 1
STD_FLOOR = 1e-3


class TrainingDivergedError(RuntimeError):
    """Raised when the loss goes non-finite, with step diagnostics."""


@dataclass
class NormalizationStats:
    """Per-channel standardization for motion and music features."""

    motion_mean: np.ndarray
    motion_std: np.ndarray
    music_mean: np.ndarray
    music_std: np.ndarray

    @classmethod
    def from_data(cls, motions: list[np.ndarray], musics: list[np.ndarray]) -> "NormalizationStats":
        motion = np.concatenate(motions, axis=0)
        music = np.concatenate(musics, axis=0)
        return cls(
            motion_mean=motion.mean(axis=0).astype(np.float32),
            motion_std=np.maximum(motion.std(axis=0), STD_FLOOR).astype(np.float32),
            music_mean=music.mean(axis=0).astype(np.float32),
            music_std=np.maximum(music.std(axis=0), STD_FLOOR).astype(np.float32),
        )

    def normalize_motion(self, x):
        return (x - self.motion_mean) / self.motion_std

    def denormalize_motion(self, x):
        return x * self.motion_std + self.motion_mean

    def normalize_music(self, x):
        return (x - self.music_mean) / self.music_std

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("motion_mean", "motion_std", "music_mean", "music_std")}


def slice_padded(frames: np.ndarray, start: int, length: int) -> np.ndarray:
    """frames[start:start+length] with explicit zero padding outside [0, T)."""
    out = np.zeros((length,) + frames.shape[1:], dtype=frames.dtype)
    lo = max(start, 0)
    hi = min(start + length, frames.shape[0])
    if hi > lo:
        out[lo - start: hi - start] = frames[lo:hi]
    return out


class WindowBank:
    """All valid (past, future, music) training windows over a set of paired
    sequences, sampled uniformly."""

    def __init__(
        self,
        motions: list[MotionSequence],
        musics: list[MusicFeatureSequence],
        music_window: int = 240,
        past_window: int = 120,
        future_window: int = 20,
    ):
        if len(motions) != len(musics):
            raise ValueError("motions and musics must pair up")
        self.motions = motions
        self.musics = musics
        self.music_window = music_window
        self.past_window = past_window
        self.future_window = future_window
        self.index: list[tuple[int, int]] = []
        for i, seq in enumerate(motions):
            last_start = len(seq) - future_window
            for pos in range(past_window, last_start + 1):
                self.index.append((i, pos))
        if not self.index:
            raise ValueError(
                f"no sequence is long enough for a {past_window}+{future_window} frame window"
            )

    def __len__(self) -> int:
        return len(self.index)

    def gather(self, picks: list[tuple[int, int]], layout: FrameLayout):
        """Assemble raw (unnormalized) arrays for a list of (seq, pos) picks."""
        music, past, future, contacts = [], [], [], []
        for i, pos in picks:
            seq = self.motions[i]
            music.append(slice_padded(self.musics[i].frames, pos - self.past_window,
                                      self.music_window))
            past.append(seq.frames[pos - self.past_window: pos])
            fut = seq.frames[pos: pos + self.future_window]
            future.append(fut)
            contacts.append(fut[:, layout.contacts])
        return (np.stack(music), np.stack(past), np.stack(future), np.stack(contacts))

    def sample(self, batch: int, rng: np.random.Generator, layout: FrameLayout):
        picks = [self.index[k] for k in rng.integers(0, len(self.index), size=batch)]
        return self.gather(picks, layout)


def save_checkpoint(
    path: str | Path,
    model: DenoiserNet,
    optimizer: torch.optim.Optimizer,
    sched: NoiseSchedule,
    stats: NormalizationStats,
    layout: FrameLayout,
    skeleton: Skeleton,
    fps: float,
    weights: LossWeights,
    step: int,
    config_echo: dict | None = None,
) -> None:
    """Atomic write (temp file + rename) of a self-describing checkpoint."""
    path = Path(path)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "denoiser_config": model.config.to_dict(),
        "schedule": {"T": sched.T, "kind": sched.kind},
        "loss_weights": weights.to_dict(),
        "normalization": stats.to_dict(),
        "layout": {"num_joints": layout.num_joints, "num_contacts": layout.num_contacts},
        "skeleton": skeleton.to_dict(),
        "fps": fps,
        "step": step,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict(),
        "config_echo": config_echo or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


@dataclass
class TrainedModel:
    """Everything needed to sample futures in raw feature units."""

    model: DenoiserNet
    sched: NoiseSchedule
    stats: NormalizationStats
    layout: FrameLayout
    skeleton: Skeleton
    fps: float
    step: int = 0
    config_echo: dict | None = None

    def sample_future(
        self, music_raw: np.ndarray, past_raw: np.ndarray, rng: torch.Generator
    ) -> np.ndarray:
        """Sample one clean future window (future_window, width), raw units."""
        cfg = self.model.config
        music = torch.from_numpy(
            np.ascontiguousarray(self.stats.normalize_music(music_raw), dtype=np.float32)
        )
        past = torch.from_numpy(
            np.ascontiguousarray(self.stats.normalize_motion(past_raw), dtype=np.float32)
        )

        def fn(music_w, past_w, future_w, t):
            with torch.no_grad():
                return self.model(
                    music_w.unsqueeze(0), past_w.unsqueeze(0),
                    future_w.unsqueeze(0), torch.as_tensor(int(t)),
                ).squeeze(0)

        window = sample_window(fn, music, past, self.sched, rng,
                               future_len=cfg.future_window)
        return self.stats.denormalize_motion(window.numpy()).astype(np.float32)


def load_checkpoint(path: str | Path) -> TrainedModel:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version}")
    model = DenoiserNet(DenoiserConfig.from_dict(payload["denoiser_config"]))
    model.load_state_dict(payload["model_state"])
    model.eval()
    sched = make_schedule(**payload["schedule"])
    stats = NormalizationStats(**payload["normalization"])
    layout = FrameLayout(**payload["layout"])
    skeleton = Skeleton.from_dict(payload["skeleton"])
    return TrainedModel(
        model=model, sched=sched, stats=stats, layout=layout,
        skeleton=skeleton, fps=float(payload["fps"]), step=int(payload["step"]),
        config_echo=payload.get("config_echo"),
    )


@dataclass
class TrainResult:
    checkpoint_path: Path
    log_path: Path
    steps: int
    final_recon: float


def load_training_data(manifest: DatasetManifest, split: str = "train"):
    entries = manifest.split(split)
    if not entries:
        raise ValueError(f"manifest has no {split!r} entries")
    motions, musics = [], []
    for e in entries:
        seq, _ = read_motion(manifest.resolve(e.motion))
        motions.append(seq)
        musics.append(ingest_features(manifest.resolve(e.music)))
    return motions, musics


def train(
    manifest: DatasetManifest,
    config: RunConfig,
    out_dir: str | Path,
    log_every: int = 1,
) -> TrainResult:
    """Run the full training loop and emit checkpoints plus a CSV loss log.

    The log has one row per `log_every` steps with columns
    (step, t, recon, mi, pos, vel, contact, total); t is the batch mean of
    the sampled diffusion steps.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    skeleton = load_skeleton(manifest.skeleton_path())
    motions, musics = load_training_data(manifest, "train")
    layout = motions[0].layout
    fps = motions[0].fps
    stats = NormalizationStats.from_data(
        [m.frames for m in motions], [m.frames for m in musics]
    )

    bank = WindowBank(
        motions, musics,
        music_window=config.windows.music,
        past_window=config.windows.past,
        future_window=config.windows.future,
    )

    torch.manual_seed(config.seed)
    model_cfg = DenoiserConfig(
        motion_dim=layout.width,
        music_dim=musics[0].dim,
        num_contacts=layout.num_contacts,
        model_width=config.model.width,
        num_heads=config.model.heads,
        num_blocks=config.model.blocks,
        music_window=config.windows.music,
        past_window=config.windows.past,
        future_window=config.windows.future,
        temporal_conv_kernel=config.model.temporal_conv_kernel,
    )
    model = DenoiserNet(model_cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.training.lr)
    sched = make_schedule(config.diffusion.T, config.diffusion.kind)
    weights = LossWeights(
        mutual_info=config.loss.mutual_info,
        perceptual=config.loss.perceptual,
        position=config.loss.position,
        velocity=config.loss.velocity,
        contact=config.loss.contact,
        mi_clamp=config.loss.mi_clamp,
    )

    data_rng = np.random.default_rng(config.seed)
    noise_rng = torch.Generator().manual_seed(config.seed + 1)

    motion_mean = torch.from_numpy(stats.motion_mean)
    motion_std = torch.from_numpy(stats.motion_std)
    music_mean = torch.from_numpy(stats.music_mean)
    music_std = torch.from_numpy(stats.music_std)

    log_path = out / "loss_log.csv"
    ckpt_path = out / "checkpoint_last.pt"
    final_recon = float("nan")

    with open(log_path, "w") as log:
        log.write("step,t,recon,mi,pos,vel,contact,total\n")
        for step in range(1, config.training.steps + 1):
            music_raw, past_raw, future_raw, contacts = bank.sample(
                config.training.batch, data_rng, layout
            )
            music = (torch.from_numpy(music_raw) - music_mean) / music_std
            past = (torch.from_numpy(past_raw) - motion_mean) / motion_std
            future = (torch.from_numpy(future_raw) - motion_mean) / motion_std
            contacts_t = torch.from_numpy(contacts)

            t = torch.randint(1, sched.T + 1, (config.training.batch,), generator=noise_rng)
            noise = torch.randn(future.shape, generator=noise_rng)
            noised = q_sample(future, t, noise, sched)

            pred = model(music, past, noised, t)
            l_recon = recon_loss(future, pred)

            pred_raw = pred * motion_std + motion_mean
            future_raw_t = torch.from_numpy(future_raw)
            l_pos, l_vel, l_contact = perceptual_losses(
                future_raw_t, pred_raw, skeleton, contacts_t, layout
            )

            past_feats = model.motion_embed(past)
            pred_feats = model.motion_embed(pred)
            l_mi = mi_loss(
                summarize_features(past_feats), summarize_features(pred_feats),
                clamp=weights.mi_clamp,
            )

            loss = total_loss(l_recon, l_mi, l_pos, l_vel, l_contact, weights)
            vals = {
                "recon": float(l_recon.detach()),
                "mi": float(l_mi.detach()),
                "pos": float(l_pos.detach()),
                "vel": float(l_vel.detach()),
                "contact": float(l_contact.detach()),
                "total": float(loss.detach()),
            }
            if not np.isfinite(vals["total"]):
                raise TrainingDivergedError(
                    f"non-finite loss at step {step} (t mean {float(t.float().mean()):.1f}): "
                    f"recon={vals['recon']:.4g} mi={vals['mi']:.4g} "
                    f"pos={vals['pos']:.4g} vel={vals['vel']:.4g} "
                    f"contact={vals['contact']:.4g}"
                )

            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()

            final_recon = vals["recon"]
            if step % log_every == 0:
                log.write(
                    f"{step},{float(t.float().mean()):.3f},{vals['recon']:.6f},"
                    f"{vals['mi']:.6f},{vals['pos']:.6f},{vals['vel']:.6f},"
                    f"{vals['contact']:.6f},{vals['total']:.6f}\n"
                )

            if step % config.training.checkpoint_every == 0:
                save_checkpoint(
                    out / f"checkpoint_{step:06d}.pt", model, optimizer, sched,
                    stats, layout, skeleton, fps, weights, step,
                    config_echo=config.to_dict(),
                )

    save_checkpoint(ckpt_path, model, optimizer, sched, stats, layout, skeleton,
                    fps, weights, config.training.steps, config_echo=config.to_dict())
    return TrainResult(
        checkpoint_path=ckpt_path, log_path=log_path,
        steps=config.training.steps, final_recon=final_recon,
    )
