"""Procedural beat-locked dance motions paired with synthetic music.

Every oscillating joint follows the beat phase so that all joint speeds
vanish exactly on the beats and nowhere else (poses are hit on the beat,
limbs swing through the middle between beats). Two oscillator profiles:

* swing: angle ~ cos(pi * phase); extremes alternate on successive beats.
* dip:   angle ~ ((1 - cos(pi * phase)) / 2)^2; neutral on even beats with
  a flattened dwell (used for knees so the feet plant around the beat),
  peak bend on odd beats.

Both have d(angle)/dt = 0 exactly at integer beat phases only, so the total
joint speed dips to zero on every beat. Genres are just different
joint/amplitude pattern families.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .dataio import DatasetManifest, ManifestEntry, save_manifest, write_motion
from .motion import FrameLayout, MotionSequence, finite_difference_velocities, label_foot_contacts
from .music import write_features, synth_music
from .skeleton import (
    SMPL24_REST_ROOT_HEIGHT,
    Skeleton,
    default_skeleton,
    forward_kinematics,
    save_skeleton,
    toy_skeleton,
)

# (joint name, axis, amplitude radians, sign, profile)
# Names missing from a skeleton are skipped, so one pattern serves both the
# bundled 24-joint skeleton and the 5-joint toy skeleton.
GENRES: dict[str, tuple[tuple[str, str, float, float, str], ...]] = {
    "groove": (
        ("left_hip", "x", 0.15, 1.0, "swing"),
        ("right_hip", "x", 0.15, -1.0, "swing"),
        ("left_knee", "x", 0.45, 1.0, "dip"),
        ("right_knee", "x", 0.45, 1.0, "dip"),
        ("left_shoulder", "x", 0.50, -1.0, "swing"),
        ("right_shoulder", "x", 0.50, 1.0, "swing"),
        ("left_elbow", "y", 0.40, 1.0, "swing"),
        ("right_elbow", "y", 0.40, -1.0, "swing"),
        ("spine1", "y", 0.20, 1.0, "swing"),
        ("neck", "z", 0.12, 1.0, "swing"),
        # toy skeleton joints
        ("spine", "z", 0.35, 1.0, "swing"),
        ("head", "x", 0.25, -1.0, "swing"),
    ),
    "bounce": (
        ("left_hip", "x", 0.10, 1.0, "swing"),
        ("right_hip", "x", 0.10, 1.0, "swing"),
        ("left_knee", "x", 0.60, 1.0, "dip"),
        ("right_knee", "x", 0.60, 1.0, "dip"),
        ("left_shoulder", "z", 0.45, 1.0, "swing"),
        ("right_shoulder", "z", 0.45, -1.0, "swing"),
        ("left_elbow", "x", 0.55, -1.0, "dip"),
        ("right_elbow", "x", 0.55, -1.0, "dip"),
        ("spine2", "x", 0.12, 1.0, "dip"),
        ("head", "x", 0.15, 1.0, "dip"),
        # toy skeleton joints
        ("spine", "x", 0.30, 1.0, "dip"),
    ),
}

_AXES = {"x": np.array([1.0, 0, 0]), "y": np.array([0, 1.0, 0]), "z": np.array([0, 0, 1.0])}


def _axis_angle_to_rot6d(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues formula for a fixed axis; returns (T, 6) column-major 6D."""
    k = axis / np.linalg.norm(axis)
    kx, ky, kz = k
    cross = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    outer = np.outer(k, k)
    eye = np.eye(3)
    sin = np.sin(angles)[:, None, None]
    cos = np.cos(angles)[:, None, None]
    mats = cos * eye + sin * cross + (1 - cos) * outer
    return np.concatenate([mats[:, :, 0], mats[:, :, 1]], axis=1)


def _rest_root_height(skel: Skeleton) -> float:
    if skel.num_joints == 24:
        return SMPL24_REST_ROOT_HEIGHT
    # place the lowest identity-pose joint 2 cm above ground
    depth = np.zeros(skel.num_joints)
    pos = np.zeros((skel.num_joints, 3))
    for j in range(1, skel.num_joints):
        pos[j] = pos[int(skel.parent_index[j])] + skel.local_offset[j]
        depth[j] = pos[j, 1]
    return float(0.02 - depth.min())


def synth_dance(
    skel: Skeleton,
    bpm: float,
    duration_s: float,
    fps: float = 60.0,
    seed: int = 0,
    genre: str = "groove",
    amplitude_scale: float = 1.0,
) -> MotionSequence:
    """A deterministic dance whose joint-speed minima fall exactly on beats."""
    if genre not in GENRES:
        raise ValueError(f"unknown genre {genre!r} (have {sorted(GENRES)})")
    rng = np.random.default_rng(seed)
    n_frames = int(round(duration_s * fps))
    phase = np.arange(n_frames) * bpm / (60.0 * fps)  # beat phase

    layout = FrameLayout(num_joints=skel.num_joints, num_contacts=skel.num_feet)
    rotations = np.zeros((n_frames, skel.num_joints, 6), dtype=np.float64)
    rotations[:, :, 0] = 1.0
    rotations[:, :, 4] = 1.0

    for name, axis, amp, sign, profile in GENRES[genre]:
        if name not in skel.joint_names:
            continue
        j = skel.joint_index(name)
        a = amp * amplitude_scale * rng.uniform(0.85, 1.15)
        if profile == "swing":
            angles = sign * a * np.cos(np.pi * phase)
        else:  # dip: flattened dwell at even beats, peak at odd beats
            angles = sign * a * (0.5 * (1.0 - np.cos(np.pi * phase))) ** 2
        rotations[:, j, :] = _axis_angle_to_rot6d(_AXES[axis], angles)

    base_height = _rest_root_height(skel)
    sway = 0.05 * amplitude_scale
    root = np.zeros((n_frames, 3), dtype=np.float64)
    root[:, 0] = sway * np.cos(np.pi * phase)
    root[:, 1] = base_height + 0.02 * amplitude_scale * 0.5 * (1 - np.cos(np.pi * phase))
    root[:, 2] = 0.03 * amplitude_scale * np.cos(np.pi * phase + np.pi)

    positions = forward_kinematics(
        skel, torch.from_numpy(root), torch.from_numpy(rotations)
    ).numpy()
    velocities = finite_difference_velocities(positions, fps)
    contacts = label_foot_contacts(positions[:, list(skel.foot_joint_indices)], fps)

    frames = np.zeros((n_frames, layout.width), dtype=np.float32)
    frames[:, layout.contacts] = contacts
    frames[:, layout.root] = root
    frames[:, layout.rotations] = rotations.reshape(n_frames, -1)
    frames[:, layout.positions] = positions.reshape(n_frames, -1)
    frames[:, layout.velocities] = velocities.reshape(n_frames, -1)
    return MotionSequence(fps=fps, layout=layout, frames=frames)


def noise_motion(layout: FrameLayout, fps: float, n_frames: int, seed: int = 0) -> MotionSequence:
    """Standard-normal nonsense motion; the baseline an untrained sampler emits."""
    rng = np.random.default_rng(seed)
    frames = rng.standard_normal((n_frames, layout.width)).astype(np.float32)
    return MotionSequence(fps=fps, layout=layout, frames=frames)


def make_dataset(
    out_dir: str | Path,
    n_sequences: int = 64,
    genres: tuple[str, ...] = ("groove", "bounce"),
    seed: int = 0,
    fps: float = 60.0,
    duration_s: float = 8.0,
    skeleton_kind: str = "smpl24",
    test_fraction: float = 0.05,
    bpm_range: tuple[float, float] = (80.0, 135.0),
) -> Path:
    """Emit paired synthetic music and dance files plus a manifest.

    Each sequence draws a bpm and an amplitude scale from a seeded stream,
    cycles through the genre list, and is tagged train or test (the last
    `test_fraction` of sequences are the test split). Returns the manifest
    path.
    """
    if n_sequences < 2:
        raise ValueError("need at least 2 sequences")
    for g in genres:
        if g not in GENRES:
            raise ValueError(f"unknown genre {g!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    skel = default_skeleton() if skeleton_kind == "smpl24" else toy_skeleton()
    save_skeleton(skel, out / "skeleton.json")

    rng = np.random.default_rng(seed)
    n_test = int(round(n_sequences * test_fraction))
    if test_fraction > 0:
        n_test = max(1, n_test)
    entries = []
    for i in range(n_sequences):
        bpm = float(rng.uniform(*bpm_range))
        amp = float(rng.uniform(0.7, 1.3))
        genre = genres[i % len(genres)]
        music_seed = int(rng.integers(0, 2**31))
        dance_seed = int(rng.integers(0, 2**31))

        music, _grid = synth_music(bpm, duration_s, fps=fps, seed=music_seed,
                                   bpm_range=bpm_range)
        dance = synth_dance(skel, bpm, duration_s, fps=fps, seed=dance_seed,
                            genre=genre, amplitude_scale=amp)

        motion_name = f"seq_{i:04d}.motion.json"
        music_name = f"seq_{i:04d}.music.json"
        write_motion(dance, out / motion_name, skeleton=skel)
        write_features(music, out / music_name)
        split = "test" if i >= n_sequences - n_test else "train"
        entries.append(ManifestEntry(motion=motion_name, music=music_name, split=split))

    manifest = DatasetManifest(fps=fps, skeleton="skeleton.json", entries=entries, root=out)
    manifest_path = out / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest_path
