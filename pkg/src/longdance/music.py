"""Frame-aligned music features and beat grids.

Features are either ingested from precomputed files (one feature vector per
motion frame) or synthesized procedurally for desk-scale experiments. The
file format is a JSON header plus a little-endian float32 frame-major
binary sidecar; see `write_features` / `ingest_features`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

# Bundled fixture channel widths (feature dims are otherwise data-driven).
DEFAULT_CHANNELS = (
    ("mfcc", 20),
    ("mfcc_delta", 20),
    ("chroma", 12),
    ("tempogram", 30),
    ("onset", 1),
)


class MusicFileError(ValueError):
    """Base class for music feature file problems."""


class MalformedHeaderError(MusicFileError):
    """Header JSON is unreadable or missing required fields."""


class ChannelSpanError(MusicFileError):
    """Channel spans overlap, leave gaps, or do not cover [0, dim)."""


class PayloadSizeError(MusicFileError):
    """Binary payload length disagrees with the header frame count."""


def _validate_channel_map(channel_map: dict[str, tuple[int, int]], dim: int) -> None:
    if not channel_map:
        raise ChannelSpanError("channel map is empty")
    spans = sorted((int(a), int(b), name) for name, (a, b) in channel_map.items())
    cursor = 0
    for start, end, name in spans:
        if start != cursor:
            kind = "overlaps previous span" if start < cursor else "leaves a gap"
            raise ChannelSpanError(f"channel {name!r} [{start},{end}) {kind} at {cursor}")
        if end <= start:
            raise ChannelSpanError(f"channel {name!r} has empty span [{start},{end})")
        cursor = end
    if cursor != dim:
        raise ChannelSpanError(f"channel spans cover [0,{cursor}) but dim is {dim}")


@dataclass
class MusicFeatureSequence:
    """Per-frame music feature vectors with named channel spans."""

    fps: float
    frames: np.ndarray                       # (T, dim) float32
    channel_map: dict[str, tuple[int, int]]  # name -> [start, end)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.frames.ndim != 2:
            raise ValueError("frames must be a (T, dim) array")
        self.channel_map = {k: (int(a), int(b)) for k, (a, b) in self.channel_map.items()}
        _validate_channel_map(self.channel_map, self.dim)

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __len__(self) -> int:
        return self.frames.shape[0]

    def channel(self, name: str) -> np.ndarray:
        """The (T, width) block of one named channel span."""
        if name not in self.channel_map:
            raise KeyError(f"sequence has no {name!r} channel")
        a, b = self.channel_map[name]
        return self.frames[:, a:b]


@dataclass
class BeatGrid:
    """Sorted beat frame indices plus the tempo they imply.

    `bpm` is None when fewer than two beats exist to estimate it from.
    """

    beat_frames: np.ndarray  # (B,) int64, strictly increasing
    bpm: float | None

    def __post_init__(self):
        self.beat_frames = np.asarray(self.beat_frames, dtype=np.int64)
        if self.beat_frames.ndim != 1:
            raise ValueError("beat_frames must be 1-D")
        if len(self.beat_frames) > 1 and not np.all(np.diff(self.beat_frames) > 0):
            raise ValueError("beat_frames must be strictly increasing")
        if self.bpm is not None and not 0 < self.bpm < 400:
            raise ValueError(f"bpm {self.bpm} outside (0, 400)")

    def __len__(self) -> int:
        return len(self.beat_frames)


def _bandlimited_noise(rng: np.random.Generator, n: int, width: int = 9) -> np.ndarray:
    raw = rng.standard_normal(n + width - 1)
    window = np.hanning(width + 2)[1:-1]
    window /= window.sum()
    return np.convolve(raw, window, mode="valid")


def synth_music(
    bpm: float,
    duration_s: float,
    fps: float = 60.0,
    seed: int = 0,
    bpm_range: tuple[float, float] = (80.0, 135.0),
    channels: tuple[tuple[str, int], ...] = DEFAULT_CHANNELS,
    noise_scale: float = 0.05,
) -> tuple[MusicFeatureSequence, BeatGrid]:
    """Deterministic synthetic music features with a known beat grid.

    The onset channel carries unit impulses exactly at the beat frames.
    Every other channel is a beat-phase-locked sinusoid (fixed per-channel
    phase and harmonic) plus seeded band-limited noise, so the beat phase is
    recoverable from the features themselves.
    """
    if duration_s <= 0 or fps <= 0:
        raise ValueError("duration_s and fps must be positive")
    lo, hi = bpm_range
    if not lo <= bpm <= hi:
        raise ValueError(f"bpm {bpm} outside configured range [{lo}, {hi}]")

    n_frames = int(round(duration_s * fps))
    period = fps * 60.0 / bpm
    n_beats = int(np.floor(duration_s * bpm / 60.0))
    beat_frames = np.unique(np.round(np.arange(n_beats) * period).astype(np.int64))
    beat_frames = beat_frames[beat_frames < n_frames]

    rng = np.random.default_rng(seed)
    dim = sum(w for _, w in channels)
    frames = np.zeros((n_frames, dim), dtype=np.float64)
    phase = np.arange(n_frames) / period  # beat phase, in beats

    channel_map: dict[str, tuple[int, int]] = {}
    cursor = 0
    chan_index = 0
    for name, width in channels:
        channel_map[name] = (cursor, cursor + width)
        for k in range(width):
            col = cursor + k
            if name == "onset":
                frames[beat_frames, col] = 1.0
            else:
                amp = rng.uniform(0.5, 1.25)
                shift = 0.0 if chan_index % 2 == 0 else np.pi / 2
                harmonic = 1 if chan_index % 3 else 2
                frames[:, col] = amp * np.cos(harmonic * np.pi * phase + shift)
                frames[:, col] += noise_scale * _bandlimited_noise(rng, n_frames)
            chan_index += 1
        cursor += width

    seq = MusicFeatureSequence(fps=fps, frames=frames.astype(np.float32),
                               channel_map=channel_map)
    return seq, BeatGrid(beat_frames=beat_frames, bpm=float(bpm))


def extract_beats(seq: MusicFeatureSequence, min_gap_frames: int = 5) -> BeatGrid:
    """Peak-pick the onset channel into a beat grid.

    Peaks are local maxima above an adaptive threshold (mean + 2 std of the
    onset curve); among peaks closer than `min_gap_frames`, only the
    strongest survives.
    """
    if "onset" not in seq.channel_map:
        raise ChannelSpanError("sequence has no 'onset' channel")
    onset = seq.channel("onset")
    curve = onset.mean(axis=1) if onset.shape[1] > 1 else onset[:, 0]
    curve = curve.astype(np.float64)
    n = len(curve)
    if n == 0:
        return BeatGrid(beat_frames=np.empty(0, dtype=np.int64), bpm=None)

    thresh = curve.mean() + 2.0 * curve.std()
    left = np.empty(n, dtype=bool)
    right = np.empty(n, dtype=bool)
    left[0], right[-1] = True, True
    left[1:] = curve[1:] >= curve[:-1]
    right[:-1] = curve[:-1] >= curve[1:]
    candidates = np.flatnonzero(left & right & (curve > thresh) & (curve > 0))

    accepted: list[int] = []
    for idx in sorted(candidates, key=lambda i: (-curve[i], i)):
        if all(abs(idx - a) >= min_gap_frames for a in accepted):
            accepted.append(int(idx))
    beats = np.array(sorted(accepted), dtype=np.int64)

    bpm = None
    if len(beats) >= 2:
        gap = float(np.median(np.diff(beats)))
        if gap > 0:
            est = 60.0 * seq.fps / gap
            bpm = est if 0 < est < 400 else None
    return BeatGrid(beat_frames=beats, bpm=bpm)


def write_features(seq: MusicFeatureSequence, path: str | Path) -> None:
    """Write the JSON header at `path` and the float32 payload sidecar next to it."""
    path = Path(path)
    payload_name = path.name + ".bin"
    header = {
        "kind": "music-features",
        "version": FORMAT_VERSION,
        "fps": seq.fps,
        "dim": seq.dim,
        "frame_count": len(seq),
        "channel_map": {k: list(v) for k, v in seq.channel_map.items()},
        "payload": payload_name,
    }
    path.write_text(json.dumps(header, indent=1))
    data = np.ascontiguousarray(seq.frames, dtype="<f4")
    (path.parent / payload_name).write_bytes(data.tobytes())


def ingest_features(path: str | Path) -> MusicFeatureSequence:
    """Read a music feature file, validating the header before touching the payload."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"header is not valid JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("kind") != "music-features":
        raise MalformedHeaderError("header missing kind == 'music-features'")
    try:
        fps = float(header["fps"])
        dim = int(header["dim"])
        frame_count = int(header["frame_count"])
        raw_map = header["channel_map"]
        payload_name = header["payload"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeaderError(f"header field problem: {exc!r}") from None
    if fps <= 0 or dim <= 0 or frame_count < 0:
        raise MalformedHeaderError("fps/dim/frame_count out of range")

    channel_map = {}
    for name, span in raw_map.items():
        if not (isinstance(span, (list, tuple)) and len(span) == 2):
            raise MalformedHeaderError(f"channel {name!r} span must be [start, end]")
        channel_map[name] = (int(span[0]), int(span[1]))
    _validate_channel_map(channel_map, dim)

    payload_path = path.parent / payload_name
    if not payload_path.exists():
        raise PayloadSizeError(f"payload sidecar {payload_name!r} not found")
    blob = payload_path.read_bytes()
    expected = frame_count * dim * 4
    if len(blob) != expected:
        raise PayloadSizeError(
            f"payload is {len(blob)} bytes, header implies {expected}"
        )
    frames = np.frombuffer(blob, dtype="<f4").reshape(frame_count, dim)
    return MusicFeatureSequence(fps=fps, frames=frames.copy(), channel_map=channel_map)
