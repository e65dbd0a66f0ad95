"""Noise schedule, partial forward noising, and ancestral reverse sampling.

The forward chain corrupts only the future-motion window of a conditioning
context; music and past motions stay clean. The reverse loop walks from
pure noise down to step 1 around a pluggable denoiser that predicts the
clean window itself (not the noise).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import torch

SCHEDULE_KINDS = ("cosine", "linear")


class ScheduleError(ValueError):
    """Raised for invalid schedule parameters or broken schedule invariants."""


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise coefficients for a T-step chain.

    Arrays have length T+1 and are 1-indexed by step; index 0 holds the
    conventional clean-data sentinel (alpha = alpha_bar = 1, beta = 0).
    """

    T: int
    kind: str
    alpha: torch.Tensor      # (T+1,) float64
    alpha_bar: torch.Tensor  # (T+1,) float64
    beta: torch.Tensor       # (T+1,) float64

    def validate(self) -> "NoiseSchedule":
        a = self.alpha
        if self.T < 2:
            raise ScheduleError("T must be >= 2")
        if a.shape != (self.T + 1,):
            raise ScheduleError("alpha must have length T+1")
        if a[0] != 1.0 or self.alpha_bar[0] != 1.0:
            raise ScheduleError("index 0 must hold the clean sentinel (alpha_bar_0 = 1)")
        steps = a[1:]
        if not ((steps > 0) & (steps < 1)).all():
            raise ScheduleError("per-step alpha must lie in (0, 1)")
        if not (steps[1:] < steps[:-1]).all():
            raise ScheduleError("per-step alpha must be strictly decreasing")
        if self.alpha_bar[-1] >= 1e-3:
            raise ScheduleError(
                f"alpha_bar at step T must be < 1e-3, got {float(self.alpha_bar[-1]):.3e}"
            )
        return self


def make_schedule(T: int, kind: str = "cosine") -> NoiseSchedule:
    """Build a validated schedule. `kind` is 'cosine' or 'linear'.

    The linear ramp is rescaled by 1000/T so short desk-scale chains still
    end at near-total noise; the cosine curve uses the usual squared-cosine
    cumulative-product shape with the final ratio clamped.
    """
    if T < 2:
        raise ScheduleError("T must be >= 2")
    if kind == "cosine":
        s = 0.008
        x = torch.arange(T + 1, dtype=torch.float64)
        curve = torch.cos((x / T + s) / (1 + s) * torch.pi / 2) ** 2
        curve = curve / curve[0]
        beta_steps = (1 - curve[1:] / curve[:-1]).clamp(1e-8, 0.999)
    elif kind == "linear":
        scale = 1000.0 / T
        beta_steps = torch.linspace(
            scale * 1e-4, min(scale * 0.02, 0.999), T, dtype=torch.float64
        )
    else:
        raise ScheduleError(f"unknown schedule kind {kind!r} (expected one of {SCHEDULE_KINDS})")

    beta = torch.cat([torch.zeros(1, dtype=torch.float64), beta_steps])
    alpha = 1.0 - beta
    alpha_bar = torch.cumprod(alpha, dim=0)
    return NoiseSchedule(T=T, kind=kind, alpha=alpha, alpha_bar=alpha_bar, beta=beta).validate()


def _check_step(t, T: int, low: int = 1):
    t_min = int(t.min()) if torch.is_tensor(t) else int(t)
    t_max = int(t.max()) if torch.is_tensor(t) else int(t)
    if t_min < low or t_max > T:
        raise ValueError(f"step {t} outside [{low}, {T}]")


def q_sample(
    x0: torch.Tensor,
    t: int | torch.Tensor,
    noise: torch.Tensor,
    sched: NoiseSchedule,
) -> torch.Tensor:
    """Closed-form forward noising: sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.

    `t` may be a scalar step or a tensor of per-sample steps matching the
    leading dimension of `x0`. Step 0 returns `x0` unchanged by convention.
    """
    _check_step(t, sched.T, low=0)
    if noise.shape != x0.shape:
        raise ValueError("noise must match x0's shape")
    abar = sched.alpha_bar.to(x0.dtype)
    if torch.is_tensor(t) and t.ndim > 0:
        coef_shape = (t.shape[0],) + (1,) * (x0.ndim - 1)
        a = abar[t].reshape(coef_shape)
    else:
        a = abar[int(t)]
    return torch.sqrt(a) * x0 + torch.sqrt(1.0 - a) * noise


@dataclass(frozen=True)
class ConditioningContext:
    """One window of conditioning: music, past motion, and a future motion
    window that is either clean (step 0) or noised to `step`."""

    music: torch.Tensor   # (M, music_dim)
    past: torch.Tensor    # (P, motion_dim)
    future: torch.Tensor  # (F, motion_dim)
    step: int = 0


def partial_noise(
    ctx: ConditioningContext,
    t: int,
    noise: torch.Tensor,
    sched: NoiseSchedule,
) -> ConditioningContext:
    """Noise only the future window of a clean context; music and past pass
    through untouched (same tensor objects, so bit-identical)."""
    if ctx.step != 0:
        raise ValueError(f"context future is already noised (step {ctx.step})")
    _check_step(t, sched.T)
    return replace(ctx, future=q_sample(ctx.future, t, noise, sched), step=int(t))


def posterior_sample(
    x_t: torch.Tensor,
    x0_hat: torch.Tensor,
    t: int,
    sched: NoiseSchedule,
    noise: torch.Tensor | None = None,
) -> torch.Tensor:
    """One ancestral step x_t -> x_{t-1} given a clean-signal prediction.

    Uses the exact Gaussian posterior of the forward chain. At t = 1 the
    posterior variance is zero, so the mean is returned and `noise` is
    ignored; for t > 1 `noise` is required.
    """
    _check_step(t, sched.T)
    t = int(t)
    dt = x_t.dtype
    abar_t = sched.alpha_bar[t].to(dt)
    abar_prev = sched.alpha_bar[t - 1].to(dt)
    alpha_t = sched.alpha[t].to(dt)
    beta_t = sched.beta[t].to(dt)

    coef_x0 = torch.sqrt(abar_prev) * beta_t / (1.0 - abar_t)
    coef_xt = torch.sqrt(alpha_t) * (1.0 - abar_prev) / (1.0 - abar_t)
    mean = coef_x0 * x0_hat + coef_xt * x_t
    if t == 1:
        return mean
    if noise is None:
        raise ValueError("noise is required for steps t > 1")
    var = beta_t * (1.0 - abar_prev) / (1.0 - abar_t)
    return mean + torch.sqrt(var) * noise


Denoiser = Callable[[torch.Tensor, torch.Tensor, torch.Tensor, int], torch.Tensor]


def sample_window(
    denoiser: Denoiser,
    music: torch.Tensor,
    past: torch.Tensor,
    sched: NoiseSchedule,
    rng: torch.Generator,
    future_len: int = 20,
) -> torch.Tensor:
    """Run the full reverse chain and return a clean future window.

    `denoiser(music, past, noised_future, t)` must return a clean-window
    prediction of the same shape as the future. All randomness comes from
    `rng`, so a fixed seed gives a bit-identical window.
    """
    shape = (future_len, past.shape[-1])
    x = torch.randn(shape, generator=rng, dtype=past.dtype)
    for t in range(sched.T, 0, -1):
        x0_hat = denoiser(music, past, x, t)
        if not torch.is_tensor(x0_hat) or x0_hat.shape != x.shape:
            got = tuple(x0_hat.shape) if torch.is_tensor(x0_hat) else type(x0_hat)
            raise ValueError(f"denoiser returned {got}, expected shape {shape}")
        noise = torch.randn(shape, generator=rng, dtype=past.dtype) if t > 1 else None
        x = posterior_sample(x, x0_hat, t, sched, noise)
    return x
