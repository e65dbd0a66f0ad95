"""Evaluation metrics: kinematic/geometric motion features, Frechet
distance, diversity, beat alignment, and freezing rate.

Feature extraction works from the position channels (finite differences
give velocities and accelerations), so generated motion is judged by what
it actually encodes rather than by its possibly-inconsistent velocity
channels.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .motion import MotionSequence, finite_difference_velocities
from .music import BeatGrid
from .skeleton import Skeleton


@dataclass
class FeatureVector:
    kind: str  # "kinematic" | "geometric"
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


def kinematic_features(seq: MotionSequence) -> FeatureVector:
    """Per-joint mean speed, per-joint mean acceleration magnitude, and a
    kinetic-energy proxy (unit mass, mean of 0.5 |v|^2): length 2J + 1."""
    pos = seq.joint_positions.astype(np.float64)
    vel = finite_difference_velocities(pos, seq.fps)
    acc = finite_difference_velocities(vel, seq.fps)
    speed = np.linalg.norm(vel, axis=-1)          # (T, J)
    acc_mag = np.linalg.norm(acc, axis=-1)        # (T, J)
    energy = 0.5 * (speed**2).mean()
    values = np.concatenate([speed.mean(axis=0), acc_mag.mean(axis=0), [energy]])
    return FeatureVector(kind="kinematic", values=values)


# Landmarks needed by the geometric templates, resolved by joint name.
_GEOMETRIC_LANDMARKS = (
    "pelvis", "neck",
    "left_hip", "right_hip", "left_knee", "right_knee",
    "left_ankle", "right_ankle", "left_foot", "right_foot",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hand", "right_hand",
)


class MissingLandmarkError(ValueError):
    """The skeleton lacks a joint required by the geometric templates."""


def _angle_at(mid: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle (radians) at `mid` between rays to `a` and `b`; straight if degenerate."""
    u = a - mid
    v = b - mid
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    denom = np.maximum(nu * nv, 1e-12)
    cos = np.clip((u * v).sum(axis=-1) / denom, -1.0, 1.0)
    ang = np.arccos(cos)
    ang[(nu < 1e-9) | (nv < 1e-9)] = np.pi
    return ang


# Thresholds for the relational templates (meters / radians).
FOOT_FORWARD_MIN = 0.05
FOOT_RAISED_MIN = 0.10
BENT_ANGLE_MAX = 2.0

GEOMETRIC_TEMPLATE_NAMES = (
    "left_ankle_in_front", "right_ankle_in_front",
    "left_hand_above_neck", "right_hand_above_neck",
    "left_knee_bent", "right_knee_bent",
    "left_foot_raised", "right_foot_raised",
    "left_hand_below_pelvis", "right_hand_below_pelvis",
    "left_elbow_bent", "right_elbow_bent",
)


def geometric_features(seq: MotionSequence, skel: Skeleton) -> FeatureVector:
    """Twelve boolean relational templates (six left/right pairs) evaluated
    per frame and averaged, giving a vector in [0, 1]^12.

    Templates, per side: ankle in front of the pelvis plane (z offset above
    0.05 m), hand above neck height, knee bent beyond ~115 degrees, foot
    raised above 0.10 m, hand below pelvis height, elbow bent beyond ~115
    degrees. Requires a skeleton exposing the standard landmark joint names.
    """
    missing = [n for n in _GEOMETRIC_LANDMARKS if n not in skel.joint_names]
    if missing:
        raise MissingLandmarkError(f"skeleton lacks landmark joints: {missing}")
    pos = seq.joint_positions.astype(np.float64)

    def p(name):
        return pos[:, skel.joint_index(name)]

    feats = []
    for side in ("left", "right"):
        ankle = p(f"{side}_ankle")
        foot = p(f"{side}_foot")
        hand = p(f"{side}_hand")
        hip = p(f"{side}_hip")
        knee = p(f"{side}_knee")
        shoulder = p(f"{side}_shoulder")
        elbow = p(f"{side}_elbow")
        wrist = p(f"{side}_wrist")
        pelvis = p("pelvis")
        neck = p("neck")
        feats.append({
            "ankle_in_front": ankle[:, 2] > pelvis[:, 2] + FOOT_FORWARD_MIN,
            "hand_above_neck": hand[:, 1] > neck[:, 1],
            "knee_bent": _angle_at(knee, hip, ankle) < BENT_ANGLE_MAX,
            "foot_raised": foot[:, 1] > FOOT_RAISED_MIN,
            "hand_below_pelvis": hand[:, 1] < pelvis[:, 1],
            "elbow_bent": _angle_at(elbow, shoulder, wrist) < BENT_ANGLE_MAX,
        })

    ordered = []
    for key in ("ankle_in_front", "hand_above_neck", "knee_bent",
                "foot_raised", "hand_below_pelvis", "elbow_bent"):
        ordered.append(feats[0][key].mean())
        ordered.append(feats[1][key].mean())
    return FeatureVector(kind="geometric", values=np.array(ordered))


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        mat = np.asarray(vectors, dtype=np.float64)
    else:
        mat = np.stack([np.asarray(v.values if isinstance(v, FeatureVector) else v,
                                   dtype=np.float64) for v in vectors])
    if mat.ndim != 2:
        raise ValueError("expected a collection of equal-length feature vectors")
    return mat


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, clipping negative
    eigenvalues (numerical noise) at zero."""
    sym = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(set_a, set_b) -> float:
    """Frechet distance between Gaussian fits of two feature collections.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the cross
    term computed as Tr((A S_b A)^{1/2}) for A = S_a^{1/2}, which is similar
    to S_a S_b but symmetric, so a plain eigendecomposition suffices.
    """
    a = _as_matrix(set_a)
    b = _as_matrix(set_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("each set needs at least 2 feature vectors")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False)
    cov_b = np.cov(b, rowvar=False)
    cov_a = np.atleast_2d(cov_a)
    cov_b = np.atleast_2d(cov_b)

    root_a = _sqrtm_psd(cov_a)
    cross = _sqrtm_psd(root_a @ cov_b @ root_a)
    value = float(
        np.sum((mu_a - mu_b) ** 2)
        + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross)
    )
    return value


def diversity(vectors) -> float:
    """Mean Euclidean distance over all unordered pairs of feature vectors."""
    mat = _as_matrix(vectors)
    n = mat.shape[0]
    if n < 2:
        return 0.0
    diff = mat[:, None, :] - mat[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    iu = np.triu_indices(n, k=1)
    return float(dist[iu].mean())


def _moving_average(x: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return x.astype(np.float64)
    kernel = np.ones(window) / window
    pad = window // 2
    padded = np.pad(x.astype(np.float64), pad, mode="edge")
    out = np.convolve(padded, kernel, mode="same")[pad:pad + len(x)]
    return out


def kinematic_beats(
    seq: MotionSequence,
    smooth_window: int = 5,
    min_gap_frames: int = 10,
) -> np.ndarray:
    """Frames where the smoothed total joint speed hits a local minimum.

    Speed is the summed per-joint speed from position finite differences,
    smoothed by a moving average; minima closer than `min_gap_frames` keep
    only the deepest.
    """
    pos = seq.joint_positions.astype(np.float64)
    if pos.shape[0] < 3:
        return np.empty(0, dtype=np.int64)
    vel = finite_difference_velocities(pos, seq.fps)
    speed = np.linalg.norm(vel, axis=-1).sum(axis=1)
    curve = _moving_average(speed, smooth_window)

    n = len(curve)
    is_min = np.zeros(n, dtype=bool)
    at_most = (curve[1:-1] <= curve[:-2]) & (curve[1:-1] <= curve[2:])
    # require an actual dip on at least one side so flat speed yields no beats
    dips = (curve[1:-1] < curve[:-2]) | (curve[1:-1] < curve[2:])
    is_min[1:-1] = at_most & dips
    candidates = np.flatnonzero(is_min)

    accepted: list[int] = []
    for idx in sorted(candidates, key=lambda i: (curve[i], i)):
        if all(abs(idx - a) >= min_gap_frames for a in accepted):
            accepted.append(int(idx))
    return np.array(sorted(accepted), dtype=np.int64)


def beat_align(
    motion: MotionSequence,
    beats: BeatGrid,
    sigma_frames: float = 3.0,
    smooth_window: int = 5,
    min_gap_frames: int = 10,
    form: str = "exp",
) -> float:
    """Similarity between kinematic beats and their nearest music beats.

    `form="exp"` (default) averages exp(-d^2 / (2 sigma^2)) over kinematic
    beats, giving a score in [0, 1]; `form="distance"` averages the raw
    frame distance instead (unbounded, lower is better). No kinematic beats
    gives 0 (the report flags this case).
    """
    kin = kinematic_beats(motion, smooth_window, min_gap_frames)
    if len(kin) == 0 or len(beats) == 0:
        return 0.0
    dist = np.min(np.abs(kin[:, None] - beats.beat_frames[None, :]), axis=1).astype(np.float64)
    if form == "exp":
        return float(np.exp(-(dist**2) / (2.0 * sigma_frames**2)).mean())
    if form == "distance":
        return float(dist.mean())
    raise ValueError(f"unknown beat_align form {form!r}")


def chunk_deltas(
    seq: MotionSequence, chunk_frames: int = 60
) -> tuple[np.ndarray, np.ndarray]:
    """Per-chunk mean absolute temporal differences of the pose (rotation)
    channels and of the root translation, for freezing analysis."""
    n = len(seq)
    if n < chunk_frames:
        raise ValueError(f"sequence has {n} frames, need at least {chunk_frames}")
    rot = seq.frames[:, seq.layout.rotations].astype(np.float64)
    root = seq.frames[:, seq.layout.root].astype(np.float64)
    n_chunks = n // chunk_frames
    d_pose = np.empty(n_chunks)
    d_trans = np.empty(n_chunks)
    for k in range(n_chunks):
        a, b = k * chunk_frames, (k + 1) * chunk_frames
        d_pose[k] = np.abs(np.diff(rot[a:b], axis=0)).mean()
        d_trans[k] = np.abs(np.diff(root[a:b], axis=0)).mean()
    return d_pose, d_trans


def freezing_rate(
    seq: MotionSequence,
    tau_pose: float,
    tau_trans: float,
    chunk_frames: int = 60,
) -> float:
    """Fraction of non-overlapping chunks whose pose and translation changes
    both fall at or below the thresholds."""
    d_pose, d_trans = chunk_deltas(seq, chunk_frames)
    frozen = (d_pose <= tau_pose) & (d_trans <= tau_trans)
    return float(frozen.mean())


def calibrate_freezing(
    sequences: list[MotionSequence],
    target_rate: float,
    tol: float = 0.02,
    chunk_frames: int = 60,
    iters: int = 60,
) -> tuple[float, float, float]:
    """Binary-search a threshold pair so the reference set's freezing rate
    lands on `target_rate`.

    Both thresholds scale together from per-metric reference levels (the 95th
    percentile of chunk deltas), which keeps the search one-dimensional and
    monotone. Returns (tau_pose, tau_trans, achieved_rate); with coarse chunk
    counts the achieved rate is the closest attainable, which may sit outside
    `tol`.
    """
    if not 0.0 <= target_rate <= 1.0:
        raise ValueError("target_rate must be in [0, 1]")
    all_pose, all_trans = [], []
    for seq in sequences:
        d_pose, d_trans = chunk_deltas(seq, chunk_frames)
        all_pose.append(d_pose)
        all_trans.append(d_trans)
    d_pose = np.concatenate(all_pose)
    d_trans = np.concatenate(all_trans)

    ref_pose = max(float(np.percentile(d_pose, 95)), 1e-12)
    ref_trans = max(float(np.percentile(d_trans, 95)), 1e-12)

    def rate(scale: float) -> float:
        return float(((d_pose <= scale * ref_pose) & (d_trans <= scale * ref_trans)).mean())

    if target_rate <= 0.0 or rate(0.0) >= target_rate:
        return 0.0, 0.0, rate(0.0)
    lo, hi = 0.0, 2.0
    while rate(hi) < target_rate and hi < 1e6:
        hi *= 2.0
    for _ in range(iters):
        mid = (lo + hi) / 2.0
        if rate(mid) < target_rate:
            lo = mid
        else:
            hi = mid
    scale = hi if abs(rate(hi) - target_rate) <= abs(rate(lo) - target_rate) else lo
    return scale * ref_pose, scale * ref_trans, rate(scale)


def _num_workers() -> int:
    env = os.environ.get("LONGDANCE_NUM_WORKERS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass
class MetricsReport:
    """Aggregate metric values plus the configuration that produced them."""

    fid_k: float | None
    fid_g: float | None
    dist_k: float
    dist_g: float | None
    beat_align: float
    freezing_rate: float
    config: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    per_sequence: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fid_k": self.fid_k,
            "fid_g": self.fid_g,
            "dist_k": self.dist_k,
            "dist_g": self.dist_g,
            "beat_align": self.beat_align,
            "freezing_rate": self.freezing_rate,
            "config": self.config,
            "warnings": self.warnings,
            "per_sequence": self.per_sequence,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def evaluate(
    generated: list[tuple[MotionSequence, BeatGrid | None]],
    reference: list[MotionSequence],
    skel: Skeleton,
    tau_pose: float,
    tau_trans: float,
    beat_sigma: float = 3.0,
    beat_smooth: int = 5,
    beat_min_gap: int = 10,
    chunk_frames: int = 60,
) -> MetricsReport:
    """Full metric suite for a generated set against a reference set.

    Feature extraction runs in a worker pool (capped by
    LONGDANCE_NUM_WORKERS) with results reduced in submission order, so
    reports are reproducible. Geometric metrics are skipped with a warning
    when the skeleton lacks the landmark joints.
    """
    warnings: list[str] = []
    has_landmarks = all(n in skel.joint_names for n in _GEOMETRIC_LANDMARKS)
    if not has_landmarks:
        warnings.append("skeleton lacks landmark joints; geometric metrics skipped")

    gen_seqs = [g[0] for g in generated]

    def features_of(seq: MotionSequence):
        kin = kinematic_features(seq).values
        geo = geometric_features(seq, skel).values if has_landmarks else None
        return kin, geo

    with ThreadPoolExecutor(max_workers=_num_workers()) as pool:
        gen_feats = list(pool.map(features_of, gen_seqs))
        ref_feats = list(pool.map(features_of, reference))

    gen_k = np.stack([f[0] for f in gen_feats])
    ref_k = np.stack([f[0] for f in ref_feats])

    fid_k = frechet_distance(gen_k, ref_k) if len(gen_k) >= 2 and len(ref_k) >= 2 else None
    if fid_k is None:
        warnings.append("too few sequences for a Frechet distance")
    dist_k = diversity(gen_k)

    fid_g = None
    dist_g = None
    if has_landmarks:
        gen_g = np.stack([f[1] for f in gen_feats])
        ref_g = np.stack([f[1] for f in ref_feats])
        if len(gen_g) >= 2 and len(ref_g) >= 2:
            fid_g = frechet_distance(gen_g, ref_g)
        dist_g = diversity(gen_g)

    per_sequence = []
    align_scores = []
    freeze_scores = []
    for i, (seq, grid) in enumerate(generated):
        entry: dict = {"index": i, "frames": len(seq)}
        if grid is not None and len(grid) > 0:
            kin = kinematic_beats(seq, beat_smooth, beat_min_gap)
            score = beat_align(seq, grid, sigma_frames=beat_sigma,
                               smooth_window=beat_smooth,
                               min_gap_frames=beat_min_gap)
            if len(kin) == 0:
                warnings.append(f"sequence {i}: no kinematic beats found")
                entry["beat_align_defined"] = False
            align_scores.append(score)
            entry["beat_align"] = score
        if len(seq) >= chunk_frames:
            fr = freezing_rate(seq, tau_pose, tau_trans, chunk_frames)
            freeze_scores.append(fr)
            entry["freezing_rate"] = fr
        else:
            warnings.append(f"sequence {i}: too short for freezing chunks")
        per_sequence.append(entry)

    return MetricsReport(
        fid_k=fid_k,
        fid_g=fid_g,
        dist_k=dist_k,
        dist_g=dist_g,
        beat_align=float(np.mean(align_scores)) if align_scores else 0.0,
        freezing_rate=float(np.mean(freeze_scores)) if freeze_scores else 0.0,
        config={
            "tau_pose": tau_pose,
            "tau_trans": tau_trans,
            "beat_sigma": beat_sigma,
            "beat_smooth": beat_smooth,
            "beat_min_gap": beat_min_gap,
            "chunk_frames": chunk_frames,
        },
        warnings=warnings,
        per_sequence=per_sequence,
    )
