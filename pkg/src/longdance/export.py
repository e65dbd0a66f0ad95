"""Joint-position exports: CSV rows and per-frame SVG stick-figure previews.

Positions are recomputed through forward kinematics from each frame's root
translation and rotations (the encoded position channels are ignored, so
exports stay consistent with the skeleton).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import torch

from .motion import MotionSequence
from .skeleton import Skeleton, forward_kinematics


def fk_positions(seq: MotionSequence, skel: Skeleton) -> np.ndarray:
    """(T, J, 3) world positions via forward kinematics."""
    if skel.num_joints != seq.layout.num_joints:
        raise ValueError("skeleton joint count does not match motion layout")
    root = torch.from_numpy(seq.root_translation.astype(np.float64))
    rot = torch.from_numpy(seq.joint_rotations.astype(np.float64))
    return forward_kinematics(skel, root, rot).numpy()


def export_positions_csv(seq: MotionSequence, skel: Skeleton, path: str | Path) -> Path:
    """One `frame,joint,x,y,z` row per joint per frame."""
    path = Path(path)
    pos = fk_positions(seq, skel)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "joint", "x", "y", "z"])
        for t in range(pos.shape[0]):
            for j in range(pos.shape[1]):
                writer.writerow(
                    [t, j, f"{pos[t, j, 0]:.7g}", f"{pos[t, j, 1]:.7g}", f"{pos[t, j, 2]:.7g}"]
                )
    return path


def parse_positions_csv(path: str | Path) -> np.ndarray:
    """Read back an exported CSV into a (T, J, 3) array."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append((int(row["frame"]), int(row["joint"]),
                         float(row["x"]), float(row["y"]), float(row["z"])))
    if not rows:
        return np.zeros((0, 0, 3))
    t_max = max(r[0] for r in rows) + 1
    j_max = max(r[1] for r in rows) + 1
    out = np.zeros((t_max, j_max, 3))
    for t, j, x, y, z in rows:
        out[t, j] = (x, y, z)
    return out


def export_preview_svg(
    seq: MotionSequence,
    skel: Skeleton,
    out_dir: str | Path,
    prefix: str = "frame",
    size: int = 320,
) -> list[Path]:
    """One SVG per frame: orthographic x/y projection, bones as lines."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pos = fk_positions(seq, skel)

    xy = pos[:, :, :2]
    lo = xy.reshape(-1, 2).min(axis=0)
    hi = xy.reshape(-1, 2).max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-3))
    margin = 0.1 * span

    def to_px(p):
        # svg y grows downward
        x = (p[0] - lo[0] + margin) / (span + 2 * margin) * size
        y = size - (p[1] - lo[1] + margin) / (span + 2 * margin) * size
        return x, y

    bones = [
        (int(skel.parent_index[j]), j)
        for j in range(skel.num_joints)
        if skel.parent_index[j] >= 0
    ]
    paths = []
    for t in range(pos.shape[0]):
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
            f'viewBox="0 0 {size} {size}">',
            f'<rect width="{size}" height="{size}" fill="white"/>',
        ]
        for a, b in bones:
            xa, ya = to_px(pos[t, a])
            xb, yb = to_px(pos[t, b])
            parts.append(
                f'<line x1="{xa:.1f}" y1="{ya:.1f}" x2="{xb:.1f}" y2="{yb:.1f}" '
                f'stroke="black" stroke-width="2"/>'
            )
        for j in range(skel.num_joints):
            x, y = to_px(pos[t, j])
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="crimson"/>')
        parts.append("</svg>")
        path = out_dir / f"{prefix}_{t:05d}.svg"
        path.write_text("\n".join(parts))
        paths.append(path)
    return paths
