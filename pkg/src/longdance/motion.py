"""Per-frame motion feature vectors and sequence-level operations.

Flat frame layout, in order:

    contacts [0, C) | root translation [C, C+3) | joint rotations (6 per
    joint) | joint positions (3 per joint) | joint velocities (3 per joint)

for J joints and C foot-contact labels, giving width C + 3 + 12*J.
Positions and velocities are world-absolute, meters and meters/second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LAYOUT_VERSION = 1


class FrameLayoutError(ValueError):
    """Raised on frame-width mismatches against a declared layout."""


@dataclass(frozen=True)
class FrameLayout:
    """Channel spans of the flat per-frame encoding for (J joints, C contacts)."""

    num_joints: int
    num_contacts: int

    @property
    def width(self) -> int:
        return self.num_contacts + 3 + 12 * self.num_joints

    @property
    def contacts(self) -> slice:
        return slice(0, self.num_contacts)

    @property
    def root(self) -> slice:
        c = self.num_contacts
        return slice(c, c + 3)

    @property
    def rotations(self) -> slice:
        start = self.num_contacts + 3
        return slice(start, start + 6 * self.num_joints)

    @property
    def positions(self) -> slice:
        start = self.num_contacts + 3 + 6 * self.num_joints
        return slice(start, start + 3 * self.num_joints)

    @property
    def velocities(self) -> slice:
        start = self.num_contacts + 3 + 9 * self.num_joints
        return slice(start, start + 3 * self.num_joints)


def assemble_frame(
    layout: FrameLayout,
    contacts: np.ndarray,
    root_translation: np.ndarray,
    joint_rotations: np.ndarray,
    joint_positions: np.ndarray,
    joint_velocities: np.ndarray,
) -> np.ndarray:
    """Pack frame parts into flat vectors; leading batch dims are allowed.

    Shapes (after the batch dims): contacts (C,), root (3,), rotations
    (J, 6) or (6J,), positions (J, 3) or (3J,), velocities likewise.
    """
    j, c = layout.num_joints, layout.num_contacts
    contacts = np.asarray(contacts, dtype=np.float32)
    root_translation = np.asarray(root_translation, dtype=np.float32)
    batch = contacts.shape[:-1]
    parts = [
        contacts.reshape(batch + (-1,)),
        root_translation.reshape(batch + (-1,)),
        np.asarray(joint_rotations, dtype=np.float32).reshape(batch + (-1,)),
        np.asarray(joint_positions, dtype=np.float32).reshape(batch + (-1,)),
        np.asarray(joint_velocities, dtype=np.float32).reshape(batch + (-1,)),
    ]
    expected = (c, 3, 6 * j, 3 * j, 3 * j)
    names = ("contacts", "root_translation", "joint_rotations",
             "joint_positions", "joint_velocities")
    for part, want, name in zip(parts, expected, names):
        if part.shape[-1] != want:
            raise FrameLayoutError(
                f"{name} has {part.shape[-1]} channels, layout expects {want}"
            )
    return np.concatenate(parts, axis=-1)


def disassemble_frame(layout: FrameLayout, frame: np.ndarray):
    """Split flat frame vectors back into their parts (inverse of assemble)."""
    frame = np.asarray(frame)
    if frame.shape[-1] != layout.width:
        raise FrameLayoutError(
            f"frame width {frame.shape[-1]} does not match layout width {layout.width}"
        )
    j = layout.num_joints
    batch = frame.shape[:-1]
    return (
        frame[..., layout.contacts],
        frame[..., layout.root],
        frame[..., layout.rotations].reshape(batch + (j, 6)),
        frame[..., layout.positions].reshape(batch + (j, 3)),
        frame[..., layout.velocities].reshape(batch + (j, 3)),
    )


@dataclass
class MotionSequence:
    """A frame-major array of flat motion feature vectors at a fixed rate."""

    fps: float
    layout: FrameLayout
    frames: np.ndarray  # (T, layout.width) float32

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.frames.ndim != 2:
            raise FrameLayoutError("frames must be a (T, width) array")
        if self.frames.shape[1] != self.layout.width:
            raise FrameLayoutError(
                f"frame width {self.frames.shape[1]} does not match layout "
                f"width {self.layout.width}"
            )

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def contacts(self) -> np.ndarray:
        return self.frames[:, self.layout.contacts]

    @property
    def root_translation(self) -> np.ndarray:
        return self.frames[:, self.layout.root]

    @property
    def joint_rotations(self) -> np.ndarray:
        t = len(self)
        return self.frames[:, self.layout.rotations].reshape(t, self.layout.num_joints, 6)

    @property
    def joint_positions(self) -> np.ndarray:
        t = len(self)
        return self.frames[:, self.layout.positions].reshape(t, self.layout.num_joints, 3)

    @property
    def joint_velocities(self) -> np.ndarray:
        t = len(self)
        return self.frames[:, self.layout.velocities].reshape(t, self.layout.num_joints, 3)

    def slice(self, start: int, stop: int) -> "MotionSequence":
        return MotionSequence(self.fps, self.layout, self.frames[start:stop].copy())


def finite_difference_velocities(positions: np.ndarray, fps: float) -> np.ndarray:
    """Forward-difference velocities of a (T, ..., 3) position track.

    v[i] = (p[i+1] - p[i]) * fps; the last frame repeats the previous
    velocity so the output keeps T frames.
    """
    positions = np.asarray(positions)
    if positions.shape[0] < 2:
        raise ValueError("need at least 2 frames to differentiate")
    vel = np.empty_like(positions)
    vel[:-1] = (positions[1:] - positions[:-1]) * fps
    vel[-1] = vel[-2]
    return vel


def compute_velocities(seq: MotionSequence) -> np.ndarray:
    """Per-frame per-joint world velocities (T, J, 3) from the position channels."""
    return finite_difference_velocities(seq.joint_positions, seq.fps)


def label_foot_contacts(
    positions: np.ndarray,
    fps: float,
    height_thresh: float = 0.05,
    speed_thresh: float = 0.15,
    up_axis: int = 1,
) -> np.ndarray:
    """Binary contact labels (T, F) for foot-joint position tracks (T, F, 3).

    A foot is in contact when it is both near the ground (height along
    `up_axis` below `height_thresh`) and nearly stationary (speed below
    `speed_thresh`). A single-frame input is treated as stationary.
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 3 or positions.shape[-1] != 3:
        raise ValueError("positions must have shape (T, F, 3)")
    if positions.shape[0] == 0:
        raise ValueError("positions must be nonempty")
    height = positions[..., up_axis]
    if positions.shape[0] == 1:
        speed = np.zeros_like(height)
    else:
        speed = np.linalg.norm(finite_difference_velocities(positions, fps), axis=-1)
    return ((height < height_thresh) & (speed < speed_thresh)).astype(np.float32)
