import numpy as np
import torch

from longdance.export import (
    export_positions_csv,
    export_preview_svg,
    fk_positions,
    parse_positions_csv,
)
from longdance.motion import FrameLayout, MotionSequence
from longdance.rotations import identity_rot6d
from longdance.skeleton import forward_kinematics, toy_skeleton
from longdance.synthdata import synth_dance


def _toy_motion(frames=10):
    return synth_dance(toy_skeleton(), bpm=120, duration_s=frames / 60.0, seed=3)


def test_csv_row_count_and_svg_count(tmp_path):
    seq = _toy_motion(10)
    skel = toy_skeleton()
    csv_path = export_positions_csv(seq, skel, tmp_path / "out.csv")
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 1 + 10 * skel.num_joints  # header + rows
    svgs = export_preview_svg(seq, skel, tmp_path / "svg")
    assert len(svgs) == 10
    assert all(p.exists() for p in svgs)
    assert svgs[0].read_text().startswith("<svg")


def test_csv_positions_match_forward_kinematics(tmp_path):
    seq = _toy_motion(8)
    skel = toy_skeleton()
    csv_path = export_positions_csv(seq, skel, tmp_path / "pos.csv")
    parsed = parse_positions_csv(csv_path)
    direct = forward_kinematics(
        skel,
        torch.from_numpy(seq.root_translation.astype(np.float64)),
        torch.from_numpy(seq.joint_rotations.astype(np.float64)),
    ).numpy()
    assert np.abs(parsed - direct).max() < 1e-6


def test_parse_round_trip(tmp_path):
    seq = _toy_motion(6)
    skel = toy_skeleton()
    csv_path = export_positions_csv(seq, skel, tmp_path / "rt.csv")
    parsed = parse_positions_csv(csv_path)
    assert np.abs(parsed - fk_positions(seq, skel)).max() < 1e-6


def test_fk_positions_ignores_position_channels():
    # exports recompute positions from rotations; stale position channels
    # in the file must not leak through
    skel = toy_skeleton()
    lay = FrameLayout(num_joints=skel.num_joints, num_contacts=skel.num_feet)
    frames = np.zeros((4, lay.width), dtype=np.float32)
    frames[:, lay.rotations] = identity_rot6d(skel.num_joints).reshape(-1).numpy()
    frames[:, lay.positions] = 99.0
    seq = MotionSequence(fps=60, layout=lay, frames=frames)
    pos = fk_positions(seq, skel)
    assert np.abs(pos).max() < 2.0
