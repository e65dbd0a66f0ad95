"""Motion files and dataset manifests.

A motion file is a JSON header carrying (fps, joint count, contact count,
layout version) next to a little-endian float32 frame-major binary sidecar;
small fixtures may instead inline the frames as JSON. Headers may embed the
skeleton so files stay self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .motion import LAYOUT_VERSION, FrameLayout, MotionSequence
from .skeleton import Skeleton


class MotionFileError(ValueError):
    """Base class for motion file problems."""


class MotionHeaderError(MotionFileError):
    """Header JSON unreadable, missing fields, or inconsistent."""


class MotionPayloadError(MotionFileError):
    """Binary payload size disagrees with the header."""


class ManifestError(ValueError):
    """Dataset manifest unreadable or violating its invariants."""


def write_motion(
    seq: MotionSequence,
    path: str | Path,
    skeleton: Skeleton | None = None,
    inline: bool = False,
) -> None:
    """Write a motion file; `inline=True` keeps frames inside the JSON header."""
    path = Path(path)
    header = {
        "kind": "motion",
        "version": 1,
        "fps": seq.fps,
        "joints": seq.layout.num_joints,
        "contacts": seq.layout.num_contacts,
        "layout_version": LAYOUT_VERSION,
        "frame_count": len(seq),
    }
    if skeleton is not None:
        header["skeleton"] = skeleton.to_dict()
    if inline:
        header["frames"] = np.asarray(seq.frames, dtype=np.float32).tolist()
        path.write_text(json.dumps(header))
        return
    payload_name = path.name + ".bin"
    header["payload"] = payload_name
    path.write_text(json.dumps(header, indent=1))
    data = np.ascontiguousarray(seq.frames, dtype="<f4")
    (path.parent / payload_name).write_bytes(data.tobytes())


def read_motion(path: str | Path) -> tuple[MotionSequence, Skeleton | None]:
    """Read a motion file written by `write_motion` (binary or inline variant)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MotionHeaderError(f"header is not valid JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("kind") != "motion":
        raise MotionHeaderError("header missing kind == 'motion'")
    try:
        fps = float(header["fps"])
        joints = int(header["joints"])
        contacts = int(header["contacts"])
        layout_version = int(header["layout_version"])
        frame_count = int(header["frame_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MotionHeaderError(f"header field problem: {exc!r}") from None
    if layout_version != LAYOUT_VERSION:
        raise MotionHeaderError(
            f"unsupported layout version {layout_version} (supported: {LAYOUT_VERSION})"
        )
    layout = FrameLayout(num_joints=joints, num_contacts=contacts)

    if "frames" in header:
        frames = np.asarray(header["frames"], dtype=np.float32)
        if frames.ndim != 2 or frames.shape != (frame_count, layout.width):
            raise MotionHeaderError(
                f"inline frames have shape {frames.shape}, header implies "
                f"({frame_count}, {layout.width})"
            )
    elif "payload" in header:
        payload_path = path.parent / header["payload"]
        if not payload_path.exists():
            raise MotionPayloadError(f"payload sidecar {header['payload']!r} not found")
        blob = payload_path.read_bytes()
        expected = frame_count * layout.width * 4
        if len(blob) != expected:
            raise MotionPayloadError(
                f"payload is {len(blob)} bytes, header implies {expected}"
            )
        frames = np.frombuffer(blob, dtype="<f4").reshape(frame_count, layout.width).copy()
    else:
        raise MotionHeaderError("header has neither 'frames' nor 'payload'")

    skeleton = None
    if "skeleton" in header:
        skeleton = Skeleton.from_dict(header["skeleton"])
        if skeleton.num_joints != joints or skeleton.num_feet != contacts:
            raise MotionHeaderError("embedded skeleton disagrees with layout fields")
    return MotionSequence(fps=fps, layout=layout, frames=frames), skeleton


SPLITS = ("train", "test")


@dataclass
class ManifestEntry:
    motion: str
    music: str
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass
class DatasetManifest:
    """Paired motion/music files with train/test split tags.

    Paths are stored relative to the manifest file's directory; `root` is
    filled in on load so entries can be resolved.
    """

    fps: float
    skeleton: str
    entries: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        motions = [e.motion for e in self.entries]
        if len(set(motions)) != len(motions):
            raise ManifestError("a motion file appears in more than one entry")

    def split(self, tag: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == tag]

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def skeleton_path(self) -> Path:
        return self.resolve(self.skeleton)

    def to_dict(self) -> dict:
        return {
            "kind": "dataset-manifest",
            "version": 1,
            "fps": self.fps,
            "skeleton": self.skeleton,
            "entries": [
                {"motion": e.motion, "music": e.music, "split": e.split}
                for e in self.entries
            ],
        }


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=1))


def load_manifest(path: str | Path, check_files: bool = True) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or data.get("kind") != "dataset-manifest":
        raise ManifestError("manifest missing kind == 'dataset-manifest'")
    try:
        entries = [ManifestEntry(**e) for e in data["entries"]]
        manifest = DatasetManifest(
            fps=float(data["fps"]),
            skeleton=data["skeleton"],
            entries=entries,
            root=path.parent,
        )
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"manifest field problem: {exc!r}") from None
    if check_files:
        missing = [
            str(p)
            for e in manifest.entries
            for p in (manifest.resolve(e.motion), manifest.resolve(e.music))
            if not p.exists()
        ]
        if not manifest.skeleton_path().exists():
            missing.append(str(manifest.skeleton_path()))
        if missing:
            raise ManifestError(f"manifest references missing files: {missing[:5]}")
    return manifest
