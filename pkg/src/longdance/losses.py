"""Training losses: reconstruction, mutual-information regularizer, and the
motion perceptual terms (position, velocity, foot contact).

All terms reduce with a mean over every element they touch, so their
magnitudes stay comparable across skeleton sizes and window lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .motion import FrameLayout
from .skeleton import Skeleton, forward_kinematics

VAR_FLOOR = 1e-6


@dataclass
class LossWeights:
    """Non-negative weights balancing the total objective.

    The position/velocity/contact defaults rescale raw-unit (meters-squared)
    terms to the same order of magnitude as the normalized-space
    reconstruction loss on the bundled synthetic data.
    """

    mutual_info: float = 0.1
    perceptual: float = 1.0
    position: float = 200.0
    velocity: float = 300.0
    contact: float = 500.0
    mi_clamp: float = 5.0

    def __post_init__(self):
        for name in ("mutual_info", "perceptual", "position", "velocity", "contact"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be >= 0")
        if self.mi_clamp <= 0:
            raise ValueError("mi_clamp must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**d)


@dataclass
class MotionDistributionSummary:
    """Diagonal-Gaussian summary (mean, variance) of embedded motion features."""

    mean: torch.Tensor
    var: torch.Tensor

    def __post_init__(self):
        if self.mean.shape != self.var.shape:
            raise ValueError("mean and var must have the same shape")


def summarize_features(feats: torch.Tensor) -> MotionDistributionSummary:
    """Per-channel mean and variance over the frame axis of (..., L, width)
    features, with the variance floored at 1e-6."""
    if feats.shape[-2] < 2:
        raise ValueError("need at least 2 frames to summarize a distribution")
    mean = feats.mean(dim=-2)
    var = feats.var(dim=-2, unbiased=False).clamp_min(VAR_FLOOR)
    return MotionDistributionSummary(mean=mean, var=var)


def recon_loss(target: torch.Tensor, pred: torch.Tensor) -> torch.Tensor:
    """Mean squared error over every future-window feature."""
    if target.shape != pred.shape:
        raise ValueError("target and prediction shapes differ")
    return (target - pred).pow(2).mean()


def gaussian_kl(p: MotionDistributionSummary, q: MotionDistributionSummary) -> torch.Tensor:
    """KL(p || q) between diagonal Gaussians, summed over channels.

    Batched summaries give one KL per leading index.
    """
    if p.mean.shape != q.mean.shape:
        raise ValueError("summary shapes differ")
    if (p.var <= 0).any() or (q.var <= 0).any():
        raise ValueError("summary variances must be positive")
    return 0.5 * (
        torch.log(q.var / p.var) + (p.var + (p.mean - q.mean).pow(2)) / q.var - 1.0
    ).sum(dim=-1)


def mi_loss(
    past_summary: MotionDistributionSummary,
    future_summary: MotionDistributionSummary,
    clamp: float = 5.0,
) -> torch.Tensor:
    """Negated per-channel KL between the past-stream and
    predicted-future-stream feature distributions, clamped to [-clamp, 0].

    Minimizing this drives the two distributions apart (loosening the
    dependence of predicted futures on the past); the clamp keeps the
    divergence-seeking bounded. The KL is averaged over channels so the
    clamp keeps its bite at any embedding width (the summed form saturates
    it immediately for wide features, silencing the gradient).
    """
    kl = gaussian_kl(past_summary, future_summary)
    width = past_summary.mean.shape[-1]
    return torch.clamp(-kl / width, min=-clamp, max=0.0).mean()


def perceptual_losses(
    target_future: torch.Tensor,
    pred_future: torch.Tensor,
    skel: Skeleton,
    contacts: torch.Tensor,
    layout: FrameLayout,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Position, velocity, and foot-contact losses for a future window.

    Shapes: target/pred (..., F, width) flat motion frames in raw units,
    contacts (..., F, num_feet) ground-truth labels. Positions come from
    forward kinematics on each frame's root translation and rotations. The
    contact term penalizes squared per-frame movement of *predicted* foot
    joints wherever the ground truth marks a contact.
    """
    if target_future.shape != pred_future.shape:
        raise ValueError("target and prediction shapes differ")
    if target_future.shape[-1] != layout.width:
        raise ValueError("frame width does not match layout")
    if target_future.shape[-2] < 2:
        raise ValueError("velocity and contact terms need at least 2 frames")

    def fk_positions(frames: torch.Tensor) -> torch.Tensor:
        root = frames[..., layout.root]
        j = layout.num_joints
        rot = frames[..., layout.rotations].reshape(frames.shape[:-1] + (j, 6))
        return forward_kinematics(skel, root, rot)

    pos_target = fk_positions(target_future)
    pos_pred = fk_positions(pred_future)
    loss_pos = (pos_target - pos_pred).pow(2).mean()

    dt_target = target_future[..., 1:, :] - target_future[..., :-1, :]
    dt_pred = pred_future[..., 1:, :] - pred_future[..., :-1, :]
    loss_vel = (dt_target - dt_pred).pow(2).mean()

    feet = list(skel.foot_joint_indices)
    if contacts.shape[-1] != len(feet):
        raise ValueError("contacts width does not match skeleton foot count")
    foot_step = pos_pred[..., 1:, feet, :] - pos_pred[..., :-1, feet, :]
    mask = contacts[..., :-1, :].unsqueeze(-1).to(foot_step.dtype)
    loss_contact = (foot_step * mask).pow(2).mean()

    return loss_pos, loss_vel, loss_contact


def total_loss(
    recon: torch.Tensor,
    mi: torch.Tensor,
    pos: torch.Tensor,
    vel: torch.Tensor,
    contact: torch.Tensor,
    weights: LossWeights,
) -> torch.Tensor:
    """Weighted sum: recon + w_mi * mi + w_mp * (w_pos*pos + w_vel*vel + w_contact*contact)."""
    perceptual = (
        weights.position * pos + weights.velocity * vel + weights.contact * contact
    )
    return recon + weights.mutual_info * mi + weights.perceptual * perceptual
