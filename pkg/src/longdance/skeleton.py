"""Joint hierarchies and forward kinematics.

Coordinate convention: +y is up (ground plane at y=0), +z is the facing
direction, +x is the body's left. Offsets and positions are in meters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .rotations import rot6d_decode


class SkeletonError(ValueError):
    """Raised for malformed skeleton definitions or files."""


@dataclass(frozen=True)
class Skeleton:
    """A joint tree: per-joint parent indices and rest offsets from the parent.

    The root is joint 0 with parent sentinel -1 and a zero offset; its world
    position comes entirely from the per-frame root translation. Joints are
    topologically ordered (every parent precedes its children) so forward
    kinematics is a single pass.
    """

    joint_names: tuple[str, ...]
    parent_index: np.ndarray          # (J,) int, root = -1
    local_offset: np.ndarray          # (J, 3) float, meters
    foot_joint_indices: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "parent_index", np.asarray(self.parent_index, dtype=np.int64))
        object.__setattr__(self, "local_offset", np.asarray(self.local_offset, dtype=np.float64))
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "foot_joint_indices", tuple(int(i) for i in self.foot_joint_indices))
        j = len(self.joint_names)
        if self.parent_index.shape != (j,):
            raise SkeletonError("parent_index length does not match joint_names")
        if self.local_offset.shape != (j, 3):
            raise SkeletonError("local_offset must have shape (J, 3)")
        if j == 0:
            raise SkeletonError("skeleton needs at least one joint")
        if self.parent_index[0] != -1:
            raise SkeletonError("joint 0 must be the root (parent -1)")
        for i in range(1, j):
            p = int(self.parent_index[i])
            if not 0 <= p < i:
                raise SkeletonError(
                    f"joint {i} has parent {p}; parents must precede children and form a tree"
                )
        if np.any(self.local_offset[0] != 0.0):
            raise SkeletonError("root local offset must be zero")
        if not self.foot_joint_indices:
            raise SkeletonError("foot_joint_indices must be non-empty")
        for i in self.foot_joint_indices:
            if not 0 <= i < j:
                raise SkeletonError(f"foot joint index {i} out of range")

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def num_feet(self) -> int:
        return len(self.foot_joint_indices)

    def joint_index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise SkeletonError(f"skeleton has no joint named {name!r}") from None

    def to_dict(self) -> dict:
        return {
            "joint_names": list(self.joint_names),
            "parents": self.parent_index.tolist(),
            "offsets": self.local_offset.tolist(),
            "foot_joints": list(self.foot_joint_indices),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Skeleton":
        try:
            return cls(
                joint_names=data["joint_names"],
                parent_index=data["parents"],
                local_offset=data["offsets"],
                foot_joint_indices=data["foot_joints"],
            )
        except KeyError as exc:
            raise SkeletonError(f"skeleton file missing field {exc}") from None


def save_skeleton(skel: Skeleton, path: str | Path) -> None:
    Path(path).write_text(json.dumps(skel.to_dict(), indent=1))


def load_skeleton(path: str | Path) -> Skeleton:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SkeletonError(f"invalid skeleton JSON: {exc}") from None
    return Skeleton.from_dict(data)


def forward_kinematics(
    skel: Skeleton,
    root_translation: torch.Tensor,
    joint_rotations: torch.Tensor,
) -> torch.Tensor:
    """World joint positions from root translation and per-joint 6D rotations.

    Accepts any leading batch shape: root_translation (..., 3) and
    joint_rotations (..., J, 6) produce positions (..., J, 3). The root sits
    at `root_translation`; each child sits at its parent's position plus the
    parent's global rotation applied to the child's rest offset. Fully
    differentiable.
    """
    root_translation = torch.as_tensor(root_translation)
    joint_rotations = torch.as_tensor(joint_rotations)
    j = skel.num_joints
    if joint_rotations.shape[-2:] != (j, 6):
        raise ValueError(
            f"joint_rotations must end in ({j}, 6), got {tuple(joint_rotations.shape)}"
        )
    if root_translation.shape[-1] != 3:
        raise ValueError("root_translation must end in 3")

    local = rot6d_decode(joint_rotations)  # (..., J, 3, 3)
    offsets = torch.as_tensor(
        skel.local_offset, dtype=joint_rotations.dtype, device=joint_rotations.device
    )

    positions: list[torch.Tensor] = []
    global_rots: list[torch.Tensor] = []
    for i in range(j):
        p = int(skel.parent_index[i])
        if p < 0:
            positions.append(root_translation)
            global_rots.append(local[..., i, :, :])
        else:
            positions.append(positions[p] + global_rots[p] @ offsets[i])
            global_rots.append(global_rots[p] @ local[..., i, :, :])
    return torch.stack(positions, dim=-2)


# Bundled SMPL-style 24-joint hierarchy. Offsets approximate an average
# adult rest pose (T-pose, toes ~1 cm above ground); they are not tied to
# any body-model asset.
_SMPL24_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    "left_hand", "right_hand",
)
_SMPL24_PARENTS = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14,
                   16, 17, 18, 19, 20, 21)
_SMPL24_OFFSETS = (
    (0.00, 0.00, 0.00),    # pelvis
    (0.07, -0.08, 0.00),   # left_hip
    (-0.07, -0.08, 0.00),  # right_hip
    (0.00, 0.12, 0.00),    # spine1
    (0.00, -0.40, 0.00),   # left_knee
    (0.00, -0.40, 0.00),   # right_knee
    (0.00, 0.13, 0.00),    # spine2
    (0.00, -0.41, 0.00),   # left_ankle
    (0.00, -0.41, 0.00),   # right_ankle
    (0.00, 0.06, 0.00),    # spine3
    (0.00, -0.03, 0.13),   # left_foot (toe)
    (0.00, -0.03, 0.13),   # right_foot (toe)
    (0.00, 0.22, 0.00),    # neck
    (0.08, 0.12, 0.00),    # left_collar
    (-0.08, 0.12, 0.00),   # right_collar
    (0.00, 0.09, 0.02),    # head
    (0.10, 0.04, 0.00),    # left_shoulder
    (-0.10, 0.04, 0.00),   # right_shoulder
    (0.26, 0.00, 0.00),    # left_elbow
    (-0.26, 0.00, 0.00),   # right_elbow
    (0.25, 0.00, 0.00),    # left_wrist
    (-0.25, 0.00, 0.00),   # right_wrist
    (0.08, 0.00, 0.00),    # left_hand
    (-0.08, 0.00, 0.00),   # right_hand
)
# heel (ankle) and toe (foot) per side: left heel, left toe, right heel, right toe
_SMPL24_FEET = (7, 10, 8, 11)

# Rest height that puts the toes ~1 cm above ground with identity rotations.
SMPL24_REST_ROOT_HEIGHT = 0.93


def default_skeleton() -> Skeleton:
    """The bundled 24-joint humanoid skeleton."""
    return Skeleton(_SMPL24_NAMES, _SMPL24_PARENTS, _SMPL24_OFFSETS, _SMPL24_FEET)


def toy_skeleton() -> Skeleton:
    """A 5-joint skeleton for fast desk-scale tests: root, spine, head, two feet."""
    return Skeleton(
        joint_names=("root", "spine", "head", "left_foot", "right_foot"),
        parent_index=(-1, 0, 1, 0, 0),
        local_offset=(
            (0.0, 0.0, 0.0),
            (0.0, 0.5, 0.0),
            (0.0, 0.3, 0.0),
            (0.2, -0.9, 0.0),
            (-0.2, -0.9, 0.0),
        ),
        foot_joint_indices=(3, 4),
    )
