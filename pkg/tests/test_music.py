import json

import numpy as np
import pytest

from longdance.music import (
    BeatGrid,
    ChannelSpanError,
    MalformedHeaderError,
    MusicFeatureSequence,
    PayloadSizeError,
    extract_beats,
    ingest_features,
    synth_music,
    write_features,
)


def test_synth_beats_at_exact_intervals():
    # 60*60/120 = 30 frames per beat
    _, grid = synth_music(bpm=120, duration_s=4.0, fps=60, seed=0)
    assert np.array_equal(grid.beat_frames, np.arange(0, 240, 30))


def test_synth_beat_count_from_duration():
    # floor(4 * 90 / 60) = 6 beats
    _, grid = synth_music(bpm=90, duration_s=4.0, fps=60, seed=1)
    assert len(grid) == 6


def test_synth_deterministic_for_seed():
    a, ga = synth_music(bpm=100, duration_s=3.0, fps=60, seed=123)
    b, gb = synth_music(bpm=100, duration_s=3.0, fps=60, seed=123)
    assert np.array_equal(a.frames, b.frames)
    assert np.array_equal(ga.beat_frames, gb.beat_frames)
    c, _ = synth_music(bpm=100, duration_s=3.0, fps=60, seed=124)
    assert not np.array_equal(a.frames, c.frames)


def test_synth_rejects_bad_args():
    with pytest.raises(ValueError):
        synth_music(bpm=120, duration_s=0.0, fps=60, seed=0)
    with pytest.raises(ValueError):
        synth_music(bpm=120, duration_s=2.0, fps=-1, seed=0)
    with pytest.raises(ValueError):
        synth_music(bpm=200, duration_s=2.0, fps=60, seed=0)  # outside default range
    synth_music(bpm=200, duration_s=2.0, fps=60, seed=0, bpm_range=(50, 300))


@pytest.mark.parametrize("bpm,seed", [(80, 0), (100, 5), (120, 9), (135, 2)])
def test_extract_recovers_synth_grid_exactly(bpm, seed):
    seq, grid = synth_music(bpm=bpm, duration_s=6.0, fps=60, seed=seed)
    found = extract_beats(seq)
    assert np.array_equal(found.beat_frames, grid.beat_frames)
    assert found.bpm == pytest.approx(bpm, rel=0.1)


def test_extract_empty_on_silent_onset():
    seq, _ = synth_music(bpm=120, duration_s=2.0, fps=60, seed=0)
    frames = seq.frames.copy()
    a, b = seq.channel_map["onset"]
    frames[:, a:b] = 0.0
    silent = MusicFeatureSequence(fps=seq.fps, frames=frames, channel_map=seq.channel_map)
    grid = extract_beats(silent)
    assert len(grid) == 0
    assert grid.bpm is None


def test_extract_min_gap_keeps_larger_peak():
    frames = np.zeros((50, 1), dtype=np.float32)
    frames[10, 0] = 0.6
    frames[13, 0] = 1.0
    seq = MusicFeatureSequence(fps=60, frames=frames, channel_map={"onset": (0, 1)})
    grid = extract_beats(seq, min_gap_frames=10)
    assert np.array_equal(grid.beat_frames, [13])


def test_extract_requires_onset_channel():
    seq = MusicFeatureSequence(
        fps=60, frames=np.zeros((10, 2), dtype=np.float32),
        channel_map={"mfcc": (0, 2)},
    )
    with pytest.raises(ChannelSpanError):
        extract_beats(seq)


def test_write_ingest_round_trip_bit_exact(tmp_path):
    seq, _ = synth_music(bpm=110, duration_s=3.0, fps=60, seed=7)
    path = tmp_path / "track.music.json"
    write_features(seq, path)
    back = ingest_features(path)
    assert np.array_equal(back.frames, seq.frames)
    assert back.channel_map == seq.channel_map
    assert back.fps == seq.fps


def test_ingest_custom_dim_fixture(tmp_path):
    rng = np.random.default_rng(3)
    channel_map = {"mfcc": (0, 20), "chroma": (20, 32), "tempogram": (32, 34), "onset": (34, 35)}
    seq = MusicFeatureSequence(
        fps=60, frames=rng.standard_normal((240, 35)).astype(np.float32),
        channel_map=channel_map,
    )
    path = tmp_path / "custom.music.json"
    write_features(seq, path)
    back = ingest_features(path)
    assert len(back) == 240
    assert back.dim == 35


def test_ingest_rejects_span_overlap(tmp_path):
    seq, _ = synth_music(bpm=100, duration_s=1.0, fps=60, seed=0)
    path = tmp_path / "bad.music.json"
    write_features(seq, path)
    header = json.loads(path.read_text())
    header["channel_map"]["mfcc"] = [0, 25]  # overlaps mfcc_delta
    path.write_text(json.dumps(header))
    with pytest.raises(ChannelSpanError):
        ingest_features(path)


def test_ingest_rejects_span_gap():
    with pytest.raises(ChannelSpanError):
        MusicFeatureSequence(
            fps=60, frames=np.zeros((4, 10), dtype=np.float32),
            channel_map={"a": (0, 3), "b": (5, 10)},
        )


def test_ingest_rejects_payload_size_mismatch(tmp_path):
    seq, _ = synth_music(bpm=100, duration_s=1.0, fps=60, seed=0)
    path = tmp_path / "short.music.json"
    write_features(seq, path)
    payload = path.parent / (path.name + ".bin")
    payload.write_bytes(payload.read_bytes()[:-8])
    with pytest.raises(PayloadSizeError):
        ingest_features(path)


def test_ingest_rejects_malformed_header(tmp_path):
    path = tmp_path / "junk.music.json"
    path.write_text("{oops")
    with pytest.raises(MalformedHeaderError):
        ingest_features(path)
    path.write_text(json.dumps({"kind": "music-features", "fps": 60}))
    with pytest.raises(MalformedHeaderError):
        ingest_features(path)
    path.write_text(json.dumps({"kind": "something-else"}))
    with pytest.raises(MalformedHeaderError):
        ingest_features(path)


def test_beat_grid_invariants():
    with pytest.raises(ValueError):
        BeatGrid(beat_frames=np.array([5, 3]), bpm=100.0)
    with pytest.raises(ValueError):
        BeatGrid(beat_frames=np.array([1, 2]), bpm=500.0)
    BeatGrid(beat_frames=np.array([], dtype=np.int64), bpm=None)
