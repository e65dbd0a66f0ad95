"""Command-line surface: dataset synthesis, training, generation,
evaluation, export, and freezing-threshold calibration.

Every command is deterministic given its seed flags and writes a config
echo into its output directory.
"""

from __future__ import annotations

import functools
import json
from pathlib import Path

import click

from .config import ConfigError, RunConfig, load_config
from .dataio import (
    ManifestError,
    MotionFileError,
    load_manifest,
    read_motion,
    write_motion,
)
from .export import export_positions_csv, export_preview_svg
from .longgen import GenerationRequest, generate_long
from .metrics import calibrate_freezing, evaluate
from .music import MusicFileError, extract_beats, ingest_features, write_features
from .skeleton import SkeletonError, load_skeleton
from .synthdata import GENRES, make_dataset
from .training import TrainingDivergedError, load_checkpoint, train

_KNOWN_ERRORS = (
    ConfigError, ManifestError, MotionFileError, MusicFileError, SkeletonError,
    TrainingDivergedError, ValueError, FileNotFoundError,
)


def _cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _KNOWN_ERRORS as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc

    return wrapper


def _echo_config(out_dir: Path, cfg: RunConfig, command: str, params: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = {"command": command, "params": params, "config": cfg.to_dict()}
    (out_dir / "config_echo.json").write_text(json.dumps(echo, indent=1))


def _resolve_config(config_path, seed, paper_config) -> RunConfig:
    cfg = load_config(config_path)
    if paper_config:
        cfg.apply_paper_scale()
    if seed is not None:
        cfg.seed = seed
    return cfg


@click.group()
def main():
    """Music-conditioned long-horizon dance generation."""


@main.command("synth-data")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-sequences", type=int, default=64, show_default=True)
@click.option("--genres", default="groove,bounce", show_default=True,
              help=f"comma-separated subset of {sorted(GENRES)}")
@click.option("--duration-s", type=float, default=8.0, show_default=True)
@click.option("--skeleton", "skeleton_kind", default="smpl24", show_default=True,
              type=click.Choice(["smpl24", "toy"]))
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
@_cli_errors
def cmd_synth_data(out_dir, seed, n_sequences, genres, duration_s, skeleton_kind, config_path):
    """Synthesize a paired music/dance dataset with a manifest."""
    cfg = _resolve_config(config_path, seed, False)
    manifest_path = make_dataset(
        out_dir,
        n_sequences=n_sequences,
        genres=tuple(g.strip() for g in genres.split(",") if g.strip()),
        seed=seed,
        fps=cfg.data.fps,
        duration_s=duration_s,
        skeleton_kind=skeleton_kind,
    )
    _echo_config(out_dir, cfg, "synth-data", {
        "seed": seed, "n_sequences": n_sequences, "genres": genres,
        "duration_s": duration_s, "skeleton": skeleton_kind,
    })
    click.echo(f"wrote {manifest_path}")


@main.command("train")
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--seed", type=int, default=None)
@click.option("--paper-config", is_flag=True, help="use full published scale settings")
@_cli_errors
def cmd_train(manifest, out_dir, config_path, seed, paper_config):
    """Train the denoiser on a dataset manifest."""
    cfg = _resolve_config(config_path, seed, paper_config)
    data = load_manifest(manifest)
    _echo_config(out_dir, cfg, "train", {"manifest": str(manifest)})
    result = train(data, cfg, out_dir)
    click.echo(f"trained {result.steps} steps; final recon {result.final_recon:.5f}")
    click.echo(f"checkpoint: {result.checkpoint_path}")
    click.echo(f"loss log:   {result.log_path}")


@main.command("generate")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--music", "music_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--seed-motion", "seed_motion_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--length-s", type=float, default=20.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--name", default="generated", show_default=True)
@_cli_errors
def cmd_generate(checkpoint, music_path, seed_motion_path, length_s, seed, out_dir, name):
    """Generate a long dance sequence from music and a seed motion."""
    model = load_checkpoint(checkpoint)
    music = ingest_features(music_path)
    seed_seq, _ = read_motion(seed_motion_path)
    past = model.model.config.past_window
    if len(seed_seq) < past:
        raise ValueError(f"seed motion has {len(seed_seq)} frames, need {past}")
    req = GenerationRequest(
        music=music,
        seed_motion=seed_seq.frames[:past],
        target_frames=int(round(length_s * model.fps)),
        seed=seed,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    result = generate_long(model, req)
    motion_out = out_dir / f"{name}.motion.json"
    write_motion(result, motion_out, skeleton=model.skeleton)
    write_features(music, out_dir / f"{name}.music.json")
    cfg = RunConfig()
    _echo_config(out_dir, cfg, "generate", {
        "checkpoint": str(checkpoint), "music": str(music_path),
        "seed_motion": str(seed_motion_path), "length_s": length_s,
        "seed": seed, "model_config": model.model.config.to_dict(),
    })
    click.echo(f"wrote {motion_out} ({len(result)} frames)")


def _collect_pairs(path: Path):
    """Motion/music pairs from a manifest file or a directory of files."""
    if path.is_file():
        manifest = load_manifest(path)
        skel = load_skeleton(manifest.skeleton_path())
        pairs = []
        for e in manifest.entries:
            seq, _ = read_motion(manifest.resolve(e.motion))
            music = ingest_features(manifest.resolve(e.music))
            pairs.append((seq, music))
        return pairs, skel
    pairs = []
    skel = None
    motion_files = sorted(path.glob("*.motion.json"))
    if not motion_files:
        raise ValueError(f"no *.motion.json files in {path}")
    for motion_file in motion_files:
        seq, embedded = read_motion(motion_file)
        skel = skel or embedded
        music_file = motion_file.with_name(
            motion_file.name.replace(".motion.json", ".music.json")
        )
        music = ingest_features(music_file) if music_file.exists() else None
        pairs.append((seq, music))
    return pairs, skel


@main.command("evaluate")
@click.argument("generated", type=click.Path(exists=True, path_type=Path))
@click.argument("reference", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path),
              help="report JSON path (defaults to stdout)")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
@_cli_errors
def cmd_evaluate(generated, reference, out_path, config_path):
    """Score a generated set against a reference set (manifests or dirs)."""
    cfg = load_config(config_path)
    gen_pairs, gen_skel = _collect_pairs(generated)
    ref_pairs, ref_skel = _collect_pairs(reference)
    skel = gen_skel or ref_skel
    if skel is None:
        raise ValueError("no skeleton found in either input")
    gen = [
        (seq, extract_beats(music) if music is not None else None)
        for seq, music in gen_pairs
    ]
    report = evaluate(
        gen, [seq for seq, _ in ref_pairs], skel,
        tau_pose=cfg.metrics.tau_pose,
        tau_trans=cfg.metrics.tau_trans,
        beat_sigma=cfg.metrics.beat_sigma,
        beat_smooth=cfg.metrics.beat_smooth,
        beat_min_gap=cfg.metrics.beat_min_gap,
        chunk_frames=cfg.metrics.chunk_frames,
    )
    text = json.dumps(report.to_dict(), indent=1)
    if out_path:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text)


@main.command("export")
@click.argument("motion", type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", required=True,
              type=click.Choice(["positions-csv", "preview-svg"]))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--skeleton", "skeleton_path", type=click.Path(exists=True, path_type=Path),
              help="overrides the skeleton embedded in the motion file")
@_cli_errors
def cmd_export(motion, fmt, out_dir, skeleton_path):
    """Export joint positions as CSV rows or per-frame SVG previews."""
    seq, embedded = read_motion(motion)
    skel = load_skeleton(skeleton_path) if skeleton_path else embedded
    if skel is None:
        raise ValueError("motion file embeds no skeleton; pass --skeleton")
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "positions-csv":
        path = export_positions_csv(seq, skel, out_dir / (motion.stem + ".positions.csv"))
        click.echo(f"wrote {path}")
    else:
        paths = export_preview_svg(seq, skel, out_dir, prefix=motion.stem)
        click.echo(f"wrote {len(paths)} SVG frames to {out_dir}")


@main.command("calibrate-freezing")
@click.argument("reference", type=click.Path(exists=True, path_type=Path))
@click.option("--target-rate", type=float, default=0.187, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path))
@click.option("--split", default="train", show_default=True,
              type=click.Choice(["train", "test", "all"]))
@_cli_errors
def cmd_calibrate_freezing(reference, target_rate, out_path, split):
    """Search thresholds so the reference set freezes at the target rate."""
    manifest = load_manifest(reference)
    entries = manifest.entries if split == "all" else manifest.split(split)
    if not entries:
        raise ValueError(f"manifest has no {split!r} entries")
    seqs = [read_motion(manifest.resolve(e.motion))[0] for e in entries]
    tau_pose, tau_trans, achieved = calibrate_freezing(seqs, target_rate)
    result = {
        "tau_pose": tau_pose,
        "tau_trans": tau_trans,
        "achieved_rate": achieved,
        "target_rate": target_rate,
    }
    text = json.dumps(result, indent=1)
    if out_path:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text)


if __name__ == "__main__":
    main()
