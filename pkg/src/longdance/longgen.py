"""Autoregressive long-horizon generation.

Starting from a 120-frame seed, the generator repeatedly takes the most
recent past window, the 240-frame music window anchored at that past
window's start (zero-padded past the music's end), samples a 20-frame
future through the reverse diffusion chain, and appends it. Generated
futures become the next step's past; every frame is produced exactly once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .motion import MotionSequence
from .music import MusicFeatureSequence
from .training import TrainedModel, slice_padded


@dataclass
class WindowSpec:
    past_range: tuple[int, int]
    music_range: tuple[int, int]
    future_range: tuple[int, int]


@dataclass
class GenerationRequest:
    music: MusicFeatureSequence
    seed_motion: np.ndarray  # (past_window, width) raw feature frames
    target_frames: int
    seed: int = 0


def window_plan(
    target_frames: int,
    past_window: int = 120,
    future_window: int = 20,
    music_window: int = 240,
    music_len: int | None = None,
) -> list[WindowSpec]:
    """The sampling schedule that tiles `target_frames` of output.

    Future ranges are contiguous, non-overlapping, and stride by the future
    window (the final window may overrun the target; generation truncates).
    Music ranges are anchored at each past window's start; when `music_len`
    is given they are clipped to the available music (padding makes up the
    rest at generation time).
    """
    if target_frames < 0:
        raise ValueError("target_frames must be non-negative")
    n_windows = max(0, math.ceil((target_frames - past_window) / future_window))
    plan = []
    for k in range(n_windows):
        pos = past_window + k * future_window
        music_start = pos - past_window
        music_stop = music_start + music_window
        if music_len is not None:
            music_start = min(music_start, music_len)
            music_stop = min(music_stop, music_len)
        plan.append(
            WindowSpec(
                past_range=(pos - past_window, pos),
                music_range=(music_start, music_stop),
                future_range=(pos, pos + future_window),
            )
        )
    return plan


def generate_long(model: TrainedModel, req: GenerationRequest) -> MotionSequence:
    """Generate a sequence of exactly `target_frames` frames.

    The seed is preserved verbatim at the start of the output. Determinism:
    a fixed request seed gives a bit-identical result.
    """
    cfg = model.model.config
    seed = np.asarray(req.seed_motion, dtype=np.float32)
    if seed.shape != (cfg.past_window, model.layout.width):
        raise ValueError(
            f"seed motion must have shape ({cfg.past_window}, {model.layout.width}), "
            f"got {tuple(seed.shape)}"
        )
    if len(req.music) == 0:
        raise ValueError("music sequence is empty")
    if req.music.dim != cfg.music_dim:
        raise ValueError(
            f"music dim {req.music.dim} does not match model music dim {cfg.music_dim}"
        )

    rng = torch.Generator().manual_seed(req.seed)
    frames = seed.copy()
    plan = window_plan(
        req.target_frames,
        past_window=cfg.past_window,
        future_window=cfg.future_window,
        music_window=cfg.music_window,
    )
    for spec in plan:
        a, b = spec.past_range
        past = frames[a:b]
        music = slice_padded(req.music.frames, spec.past_range[0], cfg.music_window)
        future = model.sample_future(music, past, rng)
        frames = np.concatenate([frames, future], axis=0)

    return MotionSequence(
        fps=model.fps, layout=model.layout, frames=frames[: req.target_frames]
    )
