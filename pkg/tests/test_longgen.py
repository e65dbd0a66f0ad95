import numpy as np
import pytest
import torch

from longdance.denoiser import DenoiserConfig, DenoiserNet
from longdance.diffusion import make_schedule
from longdance.longgen import GenerationRequest, generate_long, window_plan
from longdance.motion import FrameLayout
from longdance.music import synth_music
from longdance.skeleton import toy_skeleton
from longdance.training import NormalizationStats, TrainedModel


def test_window_plan_default_scale_arithmetic():
    plan = window_plan(1200)
    assert len(plan) == 54  # (1200 - 120) / 20
    assert plan[0].past_range == (0, 120)
    assert plan[0].music_range == (0, 240)
    assert plan[0].future_range == (120, 140)
    for a, b in zip(plan, plan[1:]):
        assert a.future_range[1] == b.future_range[0]  # contiguous
        assert b.past_range[0] - a.past_range[0] == 20  # stride
    assert plan[-1].future_range == (1180, 1200)


def test_window_plan_partial_last_window():
    assert len(window_plan(120)) == 0
    assert len(window_plan(160)) == 2
    assert len(window_plan(130)) == 1
    assert len(window_plan(0)) == 0
    with pytest.raises(ValueError):
        window_plan(-1)


def test_window_plan_music_clipping():
    plan = window_plan(400, music_len=300)
    assert plan[0].music_range == (0, 240)
    assert plan[-1].music_range[1] == 300  # clipped to the music length


def _tiny_trained_model(seed=0):
    skel = toy_skeleton()
    layout = FrameLayout(num_joints=skel.num_joints, num_contacts=skel.num_feet)
    cfg = DenoiserConfig(
        motion_dim=layout.width, music_dim=83, num_contacts=layout.num_contacts,
        model_width=16, num_heads=2, num_blocks=1,
        music_window=24, past_window=12, future_window=6,
    )
    torch.manual_seed(seed)
    model = DenoiserNet(cfg)
    model.eval()
    stats = NormalizationStats(
        motion_mean=np.zeros(layout.width, dtype=np.float32),
        motion_std=np.ones(layout.width, dtype=np.float32),
        music_mean=np.zeros(83, dtype=np.float32),
        music_std=np.ones(83, dtype=np.float32),
    )
    return TrainedModel(
        model=model, sched=make_schedule(6, "cosine"), stats=stats,
        layout=layout, skeleton=skel, fps=60.0,
    )


def _request(model, target, seed=0, duration_s=4.0):
    music, _ = synth_music(120, duration_s, fps=60, seed=1)
    rng = np.random.default_rng(2)
    seed_motion = rng.standard_normal(
        (model.model.config.past_window, model.layout.width)
    ).astype(np.float32)
    return GenerationRequest(music=music, seed_motion=seed_motion,
                             target_frames=target, seed=seed)


def test_generate_seed_only_no_sampling(monkeypatch):
    model = _tiny_trained_model()
    calls = []
    original = model.sample_future
    monkeypatch.setattr(
        model, "sample_future",
        lambda *a, **k: calls.append(1) or original(*a, **k),
    )
    req = _request(model, target=12)
    out = generate_long(model, req)
    assert len(calls) == 0
    assert np.array_equal(out.frames, req.seed_motion)


def test_generate_sampling_call_count(monkeypatch):
    # past 12 + 2 future windows of 6 covers exactly 24 frames
    model = _tiny_trained_model()
    calls = []
    original = model.sample_future
    monkeypatch.setattr(
        model, "sample_future",
        lambda *a, **k: calls.append(1) or original(*a, **k),
    )
    generate_long(model, _request(model, target=24))
    assert len(calls) == 2


def test_generate_exact_length_and_seed_preserved():
    model = _tiny_trained_model()
    req = _request(model, target=31)  # 12 seed + ceil(19/6)=4 windows, truncated
    out = generate_long(model, req)
    assert len(out) == 31
    assert np.array_equal(out.frames[:12], req.seed_motion)


def test_generate_deterministic():
    model = _tiny_trained_model()
    a = generate_long(model, _request(model, 60, seed=9))
    b = generate_long(model, _request(model, 60, seed=9))
    assert np.array_equal(a.frames, b.frames)
    c = generate_long(model, _request(model, 60, seed=10))
    assert not np.array_equal(c.frames, a.frames)


def test_generate_consumes_each_frame_once():
    # futures append without overlap: changing a late window cannot alter
    # earlier frames
    model = _tiny_trained_model()
    full = generate_long(model, _request(model, 60, seed=3))
    short = generate_long(model, _request(model, 36, seed=3))
    assert np.array_equal(full.frames[:36], short.frames)


def test_generate_validates_request():
    model = _tiny_trained_model()
    req = _request(model, 30)
    bad_seed = GenerationRequest(
        music=req.music, seed_motion=req.seed_motion[:-1],
        target_frames=30, seed=0,
    )
    with pytest.raises(ValueError):
        generate_long(model, bad_seed)

    from longdance.music import MusicFeatureSequence
    empty = MusicFeatureSequence(
        fps=60, frames=np.zeros((0, 83), dtype=np.float32),
        channel_map=req.music.channel_map,
    )
    with pytest.raises(ValueError):
        generate_long(model, GenerationRequest(
            music=empty, seed_motion=req.seed_motion, target_frames=30, seed=0,
        ))

    wrong_dim = MusicFeatureSequence(
        fps=60, frames=np.zeros((100, 5), dtype=np.float32),
        channel_map={"onset": (0, 5)},
    )
    with pytest.raises(ValueError):
        generate_long(model, GenerationRequest(
            music=wrong_dim, seed_motion=req.seed_motion, target_frames=30, seed=0,
        ))
