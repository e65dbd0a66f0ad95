"""Continuous 6D rotation representation.

A rotation is stored as the first two columns of its matrix, flattened
column-major into six numbers. Decoding runs Gram-Schmidt on the two
implied columns and completes the frame with a cross product, so any
pair of linearly independent columns maps to a proper rotation.
"""

from __future__ import annotations

import torch

DEGENERACY_EPS = 1e-8


class DegenerateRotationError(ValueError):
    """Raised when a 6D rotation's implied columns are not linearly independent."""


def rot6d_decode(r: torch.Tensor) -> torch.Tensor:
    """Decode 6D rotations (..., 6) into rotation matrices (..., 3, 3).

    The six components are (a1, a2) stacked column-major: r[..., :3] is the
    first implied column, r[..., 3:] the second. The result is orthonormal
    with determinant +1 and invariant to positive rescaling of each column.

    Raises:
        DegenerateRotationError: if either column norm (after removing the
            first column's component from the second) falls below 1e-8.
    """
    r = torch.as_tensor(r)
    if r.shape[-1] != 6:
        raise ValueError(f"expected trailing dimension 6, got {tuple(r.shape)}")
    a1 = r[..., 0:3]
    a2 = r[..., 3:6]

    n1 = torch.linalg.vector_norm(a1, dim=-1, keepdim=True)
    if (n1 < DEGENERACY_EPS).any():
        raise DegenerateRotationError("first column has near-zero norm")
    b1 = a1 / n1

    proj = (b1 * a2).sum(dim=-1, keepdim=True)
    u2 = a2 - proj * b1
    n2 = torch.linalg.vector_norm(u2, dim=-1, keepdim=True)
    if (n2 < DEGENERACY_EPS).any():
        raise DegenerateRotationError("columns are parallel or second column near zero")
    b2 = u2 / n2

    b3 = torch.linalg.cross(b1, b2, dim=-1)
    return torch.stack((b1, b2, b3), dim=-1)


def rot6d_encode(m: torch.Tensor, atol: float = 1e-5) -> torch.Tensor:
    """Encode rotation matrices (..., 3, 3) as 6D vectors (..., 6).

    Keeps the first two columns; `rot6d_decode` inverts this exactly for
    valid rotations.

    Raises:
        ValueError: if the input is not orthonormal with determinant +1
            (checked to `atol`).
    """
    m = torch.as_tensor(m)
    if m.shape[-2:] != (3, 3):
        raise ValueError(f"expected trailing shape (3, 3), got {tuple(m.shape)}")
    eye = torch.eye(3, dtype=m.dtype, device=m.device).expand_as(m)
    gram_err = (m.transpose(-1, -2) @ m - eye).abs().max()
    if gram_err > atol:
        raise ValueError(f"input is not orthonormal (max |M^T M - I| = {gram_err:.3e})")
    if (torch.linalg.det(m) < 0).any():
        raise ValueError("input has determinant -1 (a reflection, not a rotation)")
    return torch.cat((m[..., :, 0], m[..., :, 1]), dim=-1)


def identity_rot6d(*shape: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """6D encoding of the identity rotation, broadcast to `shape + (6,)`."""
    base = torch.tensor([1.0, 0.0, 0.0, 0.0, 1.0, 0.0], dtype=dtype)
    return base.expand(*shape, 6).clone()
