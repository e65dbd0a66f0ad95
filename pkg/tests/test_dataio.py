import json

import numpy as np
import pytest

from longdance.dataio import (
    DatasetManifest,
    ManifestEntry,
    ManifestError,
    MotionHeaderError,
    MotionPayloadError,
    load_manifest,
    read_motion,
    save_manifest,
    write_motion,
)
from longdance.motion import MotionSequence


def _random_motion(layout, frames=30, seed=0, fps=60.0):
    rng = np.random.default_rng(seed)
    return MotionSequence(
        fps=fps, layout=layout,
        frames=rng.standard_normal((frames, layout.width)).astype(np.float32),
    )


def test_motion_round_trip_binary(tmp_path, layout_toy, skel_toy):
    seq = _random_motion(layout_toy)
    path = tmp_path / "a.motion.json"
    write_motion(seq, path, skeleton=skel_toy)
    back, skel = read_motion(path)
    assert np.array_equal(back.frames, seq.frames)
    assert back.fps == seq.fps
    assert back.layout == seq.layout
    assert skel is not None and skel.joint_names == skel_toy.joint_names


def test_motion_round_trip_inline(tmp_path, layout_toy):
    seq = _random_motion(layout_toy, frames=5)
    path = tmp_path / "b.motion.json"
    write_motion(seq, path, inline=True)
    back, skel = read_motion(path)
    assert np.allclose(back.frames, seq.frames)
    assert skel is None
    assert not (tmp_path / "b.motion.json.bin").exists()


def test_motion_payload_size_checked(tmp_path, layout_toy):
    seq = _random_motion(layout_toy)
    path = tmp_path / "c.motion.json"
    write_motion(seq, path)
    sidecar = tmp_path / "c.motion.json.bin"
    sidecar.write_bytes(sidecar.read_bytes()[:-4])
    with pytest.raises(MotionPayloadError):
        read_motion(path)
    sidecar.unlink()
    with pytest.raises(MotionPayloadError):
        read_motion(path)


def test_motion_header_errors(tmp_path, layout_toy):
    path = tmp_path / "bad.motion.json"
    path.write_text("{nope")
    with pytest.raises(MotionHeaderError):
        read_motion(path)
    path.write_text(json.dumps({"kind": "motion", "fps": 60}))
    with pytest.raises(MotionHeaderError):
        read_motion(path)
    header = {
        "kind": "motion", "fps": 60, "joints": 5, "contacts": 2,
        "layout_version": 99, "frame_count": 1, "frames": [[0.0]],
    }
    path.write_text(json.dumps(header))
    with pytest.raises(MotionHeaderError):
        read_motion(path)


def test_motion_header_skeleton_consistency(tmp_path, layout_toy, skel_toy):
    seq = _random_motion(layout_toy)
    path = tmp_path / "d.motion.json"
    write_motion(seq, path, skeleton=skel_toy)
    header = json.loads(path.read_text())
    header["skeleton"]["foot_joints"] = [3]  # now 1 foot vs 2 contacts
    path.write_text(json.dumps(header))
    with pytest.raises(MotionHeaderError):
        read_motion(path)


def test_manifest_round_trip(tmp_path, layout_toy, skel_toy):
    from longdance.music import synth_music, write_features
    from longdance.skeleton import save_skeleton

    save_skeleton(skel_toy, tmp_path / "skeleton.json")
    entries = []
    for i in range(3):
        write_motion(_random_motion(layout_toy, seed=i), tmp_path / f"m{i}.motion.json")
        music, _ = synth_music(100, 1.0, fps=60, seed=i)
        write_features(music, tmp_path / f"m{i}.music.json")
        entries.append(ManifestEntry(
            motion=f"m{i}.motion.json", music=f"m{i}.music.json",
            split="train" if i < 2 else "test",
        ))
    manifest = DatasetManifest(fps=60.0, skeleton="skeleton.json", entries=entries,
                               root=tmp_path)
    save_manifest(manifest, tmp_path / "manifest.json")
    back = load_manifest(tmp_path / "manifest.json")
    assert len(back.split("train")) == 2
    assert len(back.split("test")) == 1
    assert back.skeleton_path().exists()


def test_manifest_rejects_duplicates_and_bad_split():
    with pytest.raises(ManifestError):
        DatasetManifest(
            fps=60, skeleton="s.json",
            entries=[
                ManifestEntry("a.json", "b.json", "train"),
                ManifestEntry("a.json", "c.json", "test"),
            ],
        )
    with pytest.raises(ManifestError):
        ManifestEntry("a.json", "b.json", "validation")


def test_manifest_missing_files_detected(tmp_path):
    manifest = {
        "kind": "dataset-manifest", "version": 1, "fps": 60,
        "skeleton": "skeleton.json",
        "entries": [{"motion": "gone.motion.json", "music": "gone.music.json",
                     "split": "train"}],
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    with pytest.raises(ManifestError):
        load_manifest(path)
    assert load_manifest(path, check_files=False).fps == 60
