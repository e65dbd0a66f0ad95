"""The learned denoiser: a full-attention transformer over the concatenated
music / past-motion / noised-future token sequence.

Past and future motion frames go through one shared temporal-convolution
embedder so real and noisy motion features live in the same space. After
every attention block the future-token features are modulated by a
feature-wise affine transform driven by the (noised) global root
trajectory, which starts as an exact identity at initialization. The
output head reads the clean-window prediction off the future positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .diffusion import ConditioningContext


@dataclass
class DenoiserConfig:
    motion_dim: int
    music_dim: int
    num_contacts: int = 4          # locates the root-translation channels
    model_width: int = 64          # 512 at paper scale
    num_heads: int = 4
    num_blocks: int = 4
    music_window: int = 240
    past_window: int = 120
    future_window: int = 20
    temporal_conv_kernel: int = 3

    def __post_init__(self):
        if self.model_width % self.num_heads != 0:
            raise ValueError("model_width must be divisible by num_heads")
        for name in ("music_window", "past_window", "future_window"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.temporal_conv_kernel % 2 != 1:
            raise ValueError("temporal_conv_kernel must be odd (same-length padding)")
        if self.motion_dim < self.num_contacts + 3:
            raise ValueError("motion_dim too small to contain contacts + root translation")

    @property
    def total_tokens(self) -> int:
        return self.music_window + self.past_window + self.future_window

    @property
    def root_slice(self) -> slice:
        return slice(self.num_contacts, self.num_contacts + 3)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserConfig":
        return cls(**d)


def sinusoidal_embedding(positions: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard fixed sin/cos embedding of integer positions into `dim` channels."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half
    )
    args = positions.to(torch.float64).unsqueeze(-1) * freqs
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[..., :1])], dim=-1)
    return emb.to(torch.float32)


class GTMLayer(nn.Module):
    """Global-trajectory modulation: per-frame, per-channel affine transform
    of future-token features, with scale and shift learned as linear
    functions of the root trajectory point.

    Initialized so scale == 1 and shift == 0 everywhere, i.e. an exact
    identity until training moves it.
    """

    def __init__(self, model_width: int):
        super().__init__()
        self.scale_map = nn.Linear(3, model_width)
        self.shift_map = nn.Linear(3, model_width)
        nn.init.zeros_(self.scale_map.weight)
        nn.init.ones_(self.scale_map.bias)
        nn.init.zeros_(self.shift_map.weight)
        nn.init.zeros_(self.shift_map.bias)

    def forward(self, feats: torch.Tensor, trajectory: torch.Tensor) -> torch.Tensor:
        if feats.shape[:-1] != trajectory.shape[:-1] or trajectory.shape[-1] != 3:
            raise ValueError(
                f"trajectory {tuple(trajectory.shape)} does not align with "
                f"features {tuple(feats.shape)}"
            )
        gamma = self.scale_map(trajectory)
        beta = self.shift_map(trajectory)
        return gamma * feats + beta


class SharedMotionEmbedder(nn.Module):
    """One temporal convolution shared verbatim by the past and future streams."""

    def __init__(self, motion_dim: int, model_width: int, kernel: int = 3):
        super().__init__()
        self.conv = nn.Conv1d(motion_dim, model_width, kernel, padding=kernel // 2)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        # (B, L, motion_dim) -> (B, L, model_width)
        return self.conv(frames.transpose(1, 2)).transpose(1, 2)


class AttentionBlock(nn.Module):
    """Pre-norm full self-attention + feed-forward, both residual."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, 4 * width),
            nn.GELU(),
            nn.Linear(4 * width, width),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        return x + self.mlp(self.norm2(x))


class DenoiserNet(nn.Module):
    """Predicts the clean future window from (music, past, noised future, step)."""

    SEG_MUSIC, SEG_PAST, SEG_FUTURE = 0, 1, 2

    def __init__(self, config: DenoiserConfig, use_gtm: bool = True):
        super().__init__()
        self.config = config
        self.use_gtm = use_gtm
        w = config.model_width

        self.music_proj = nn.Linear(config.music_dim, w)
        self.motion_embed = SharedMotionEmbedder(
            config.motion_dim, w, config.temporal_conv_kernel
        )
        self.segment_embed = nn.Parameter(torch.zeros(3, w))
        nn.init.normal_(self.segment_embed, std=0.02)
        self.time_mlp = nn.Sequential(nn.Linear(w, w), nn.SiLU(), nn.Linear(w, w))

        self.blocks = nn.ModuleList(
            AttentionBlock(w, config.num_heads) for _ in range(config.num_blocks)
        )
        self.gtms = nn.ModuleList(GTMLayer(w) for _ in range(config.num_blocks))
        self.out_norm = nn.LayerNorm(w)
        self.out_head = nn.Linear(w, config.motion_dim)

        pos = sinusoidal_embedding(torch.arange(config.total_tokens), w)
        self.register_buffer("pos_embed", pos, persistent=False)

    def _check_window(self, name: str, x: torch.Tensor, length: int, dim: int):
        if x.ndim != 3 or x.shape[1] != length or x.shape[2] != dim:
            raise ValueError(
                f"{name} must have shape (B, {length}, {dim}), got {tuple(x.shape)}"
            )

    def embed_tokens(
        self,
        music: torch.Tensor,
        past: torch.Tensor,
        future: torch.Tensor,
        t: torch.Tensor,
    ) -> torch.Tensor:
        """Pre-attention token sequence (B, music+past+future, width).

        Concatenates the projected music with the shared-embedded past and
        future streams, then adds positional, segment, and timestep
        embeddings to every token.
        """
        cfg = self.config
        self._check_window("music", music, cfg.music_window, cfg.music_dim)
        self._check_window("past", past, cfg.past_window, cfg.motion_dim)
        self._check_window("future", future, cfg.future_window, cfg.motion_dim)

        tokens = torch.cat(
            [
                self.music_proj(music) + self.segment_embed[self.SEG_MUSIC],
                self.motion_embed(past) + self.segment_embed[self.SEG_PAST],
                self.motion_embed(future) + self.segment_embed[self.SEG_FUTURE],
            ],
            dim=1,
        )
        tokens = tokens + self.pos_embed.to(tokens.dtype)
        t = torch.as_tensor(t, device=tokens.device)
        if t.ndim == 0:
            t = t.expand(tokens.shape[0])
        t_emb = self.time_mlp(
            sinusoidal_embedding(t, self.config.model_width).to(tokens.dtype)
        )
        return tokens + t_emb.unsqueeze(1)

    def forward(
        self,
        music: torch.Tensor,
        past: torch.Tensor,
        future: torch.Tensor,
        t: torch.Tensor,
    ) -> torch.Tensor:
        """Clean-window prediction (B, future_window, motion_dim).

        Attention spans all tokens with no masking; after every block the
        future-token features are re-modulated by the noised root trajectory
        read from the future frames' root-translation channels.
        """
        cfg = self.config
        tokens = self.embed_tokens(music, past, future, t)
        trajectory = future[..., cfg.root_slice]

        f = cfg.future_window
        for block, gtm in zip(self.blocks, self.gtms):
            tokens = block(tokens)
            if self.use_gtm:
                tokens = torch.cat(
                    [tokens[:, :-f], gtm(tokens[:, -f:], trajectory)], dim=1
                )
        return self.out_head(self.out_norm(tokens[:, -f:]))

    def denoise(self, ctx: ConditioningContext) -> torch.Tensor:
        """Single-window prediction (future_window, motion_dim) for a noised context."""
        if ctx.step < 1:
            raise ValueError(f"context step must be >= 1, got {ctx.step}")
        out = self.forward(
            ctx.music.unsqueeze(0),
            ctx.past.unsqueeze(0),
            ctx.future.unsqueeze(0),
            torch.as_tensor(ctx.step),
        )
        return out.squeeze(0)

    def as_window_fn(self):
        """Adapter matching the reverse-sampler's denoiser callable signature."""

        def fn(music, past, future, t):
            with torch.no_grad():
                return self.forward(
                    music.unsqueeze(0),
                    past.unsqueeze(0),
                    future.unsqueeze(0),
                    torch.as_tensor(int(t)),
                ).squeeze(0)

        return fn
