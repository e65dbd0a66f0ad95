"""Music-conditioned long-horizon dance generation and evaluation."""

from .config import RunConfig, load_config
from .dataio import DatasetManifest, load_manifest, read_motion, write_motion
from .denoiser import DenoiserConfig, DenoiserNet, GTMLayer, SharedMotionEmbedder
from .diffusion import (
    ConditioningContext,
    NoiseSchedule,
    make_schedule,
    partial_noise,
    posterior_sample,
    q_sample,
    sample_window,
)
from .longgen import GenerationRequest, generate_long, window_plan
from .losses import LossWeights, mi_loss, perceptual_losses, recon_loss, total_loss
from .metrics import (
    MetricsReport,
    beat_align,
    calibrate_freezing,
    diversity,
    evaluate,
    frechet_distance,
    freezing_rate,
    geometric_features,
    kinematic_features,
)
from .motion import FrameLayout, MotionSequence, compute_velocities, label_foot_contacts
from .music import BeatGrid, MusicFeatureSequence, extract_beats, ingest_features, synth_music
from .rotations import rot6d_decode, rot6d_encode
from .skeleton import Skeleton, default_skeleton, forward_kinematics, toy_skeleton
from .synthdata import make_dataset, synth_dance
from .training import TrainedModel, load_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "BeatGrid",
    "ConditioningContext",
    "DatasetManifest",
    "DenoiserConfig",
    "DenoiserNet",
    "FrameLayout",
    "GTMLayer",
    "GenerationRequest",
    "LossWeights",
    "MetricsReport",
    "MotionSequence",
    "MusicFeatureSequence",
    "NoiseSchedule",
    "RunConfig",
    "SharedMotionEmbedder",
    "Skeleton",
    "TrainedModel",
    "beat_align",
    "calibrate_freezing",
    "compute_velocities",
    "default_skeleton",
    "diversity",
    "evaluate",
    "extract_beats",
    "forward_kinematics",
    "frechet_distance",
    "freezing_rate",
    "generate_long",
    "geometric_features",
    "ingest_features",
    "kinematic_features",
    "label_foot_contacts",
    "load_checkpoint",
    "load_config",
    "load_manifest",
    "make_dataset",
    "make_schedule",
    "mi_loss",
    "partial_noise",
    "perceptual_losses",
    "posterior_sample",
    "q_sample",
    "read_motion",
    "recon_loss",
    "rot6d_decode",
    "rot6d_encode",
    "sample_window",
    "synth_dance",
    "synth_music",
    "total_loss",
    "toy_skeleton",
    "train",
    "window_plan",
    "write_motion",
]
