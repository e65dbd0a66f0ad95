import pytest
import torch

from longdance.diffusion import (
    ConditioningContext,
    NoiseSchedule,
    ScheduleError,
    make_schedule,
    partial_noise,
    posterior_sample,
    q_sample,
    sample_window,
)


def test_paper_scale_cosine_schedule():
    sched = make_schedule(T=1000, kind="cosine")
    assert float(sched.alpha_bar[-1]) < 1e-3
    steps = sched.alpha[1:]
    assert bool((steps[1:] < steps[:-1]).all())


def test_two_step_linear_products():
    sched = make_schedule(T=2, kind="linear")
    assert float(sched.alpha_bar[0]) == 1.0
    assert float(sched.alpha_bar[1]) == pytest.approx(float(sched.alpha[1]))
    assert float(sched.alpha_bar[2]) == pytest.approx(
        float(sched.alpha[1] * sched.alpha[2])
    )


@pytest.mark.parametrize("kind", ["cosine", "linear"])
@pytest.mark.parametrize("T", [2, 10, 50, 200, 1000])
def test_schedule_invariants_exhaustive(kind, T):
    sched = make_schedule(T=T, kind=kind)
    steps = sched.alpha[1:]
    assert bool(((steps > 0) & (steps < 1)).all())
    for t in range(2, T + 1):
        assert float(sched.alpha[t]) < float(sched.alpha[t - 1])
    assert float(sched.alpha_bar[-1]) < 1e-3
    prod = torch.cumprod(sched.alpha, dim=0)
    assert torch.allclose(prod, sched.alpha_bar)


def test_schedule_rejects_bad_args():
    with pytest.raises(ScheduleError):
        make_schedule(T=1, kind="cosine")
    with pytest.raises(ScheduleError):
        make_schedule(T=50, kind="quadratic")


def test_q_sample_step_zero_returns_clean(sched50):
    x0 = torch.randn(5, 4, generator=torch.Generator().manual_seed(0))
    noise = torch.randn(5, 4, generator=torch.Generator().manual_seed(1))
    assert torch.equal(q_sample(x0, 0, noise, sched50), x0)


def test_q_sample_terminal_step_is_nearly_pure_noise(sched50):
    g = torch.Generator().manual_seed(2)
    x0 = torch.randn(6, 8, generator=g)
    noise = torch.randn(6, 8, generator=g)
    xt = q_sample(x0, sched50.T, noise, sched50)
    abar = float(sched50.alpha_bar[-1])
    bound = abar**0.5 * float(x0.abs().max()) + (1 - (1 - abar) ** 0.5) * float(
        noise.abs().max()
    )
    assert float((xt - noise).abs().max()) <= bound + 1e-6


def test_q_sample_validates_inputs(sched50):
    x0 = torch.zeros(2, 3)
    with pytest.raises(ValueError):
        q_sample(x0, sched50.T + 1, torch.zeros(2, 3), sched50)
    with pytest.raises(ValueError):
        q_sample(x0, -1, torch.zeros(2, 3), sched50)
    with pytest.raises(ValueError):
        q_sample(x0, 1, torch.zeros(2, 4), sched50)


def test_q_sample_moments_match_iterated_chain(sched50):
    """Closed form vs literally iterating the one-step noising, in moments."""
    g = torch.Generator().manual_seed(3)
    x0 = torch.tensor([1.5, -2.0, 0.5, 3.0])
    n, t_probe = 5000, 10
    closed = q_sample(
        x0.expand(n, 4), torch.full((n,), t_probe), torch.randn(n, 4, generator=g), sched50
    )
    x = x0.expand(n, 4).clone()
    for t in range(1, t_probe + 1):
        eps = torch.randn(n, 4, generator=g)
        x = torch.sqrt(sched50.alpha[t]).float() * x + torch.sqrt(
            1 - sched50.alpha[t]
        ).float() * eps
    expected_mean = float(sched50.alpha_bar[t_probe]) ** 0.5 * x0
    expected_std = (1 - float(sched50.alpha_bar[t_probe])) ** 0.5
    for sample in (closed, x):
        assert torch.allclose(sample.mean(dim=0), expected_mean, atol=0.06)
        assert torch.allclose(
            sample.std(dim=0), torch.full((4,), expected_std), rtol=0.02, atol=0.02
        )


def _random_ctx(g, music_dim=6, motion_dim=10, m=16, p=8, f=4):
    return ConditioningContext(
        music=torch.randn(m, music_dim, generator=g),
        past=torch.randn(p, motion_dim, generator=g),
        future=torch.randn(f, motion_dim, generator=g),
    )


def test_partial_noise_leaves_conditions_untouched(sched50):
    g = torch.Generator().manual_seed(4)
    for _ in range(20):
        ctx = _random_ctx(g)
        music_before = ctx.music.clone()
        past_before = ctx.past.clone()
        noised = partial_noise(ctx, 7, torch.randn_like(ctx.future), sched50)
        assert torch.equal(noised.music, music_before)
        assert torch.equal(noised.past, past_before)
        assert noised.step == 7
        assert not torch.equal(noised.future, ctx.future)


def test_partial_noise_zero_noise_branch(sched50):
    g = torch.Generator().manual_seed(5)
    ctx = _random_ctx(g)
    t = 12
    noised = partial_noise(ctx, t, torch.zeros_like(ctx.future), sched50)
    scale = float(sched50.alpha_bar[t]) ** 0.5
    assert torch.allclose(noised.future, scale * ctx.future, atol=1e-6)


def test_partial_noise_terminal_step_is_standard_normal(sched50):
    g = torch.Generator().manual_seed(6)
    ctx = ConditioningContext(
        music=torch.zeros(4, 2),
        past=torch.zeros(4, 2),
        future=torch.randn(2000, 16, generator=g) * 2 + 1.0,
    )
    noised = partial_noise(ctx, sched50.T, torch.randn_like(ctx.future), sched50)
    assert abs(float(noised.future.mean())) < 0.05
    assert abs(float(noised.future.var()) - 1.0) < 0.1


def test_partial_noise_rejects_already_noised(sched50):
    g = torch.Generator().manual_seed(7)
    ctx = _random_ctx(g)
    noised = partial_noise(ctx, 3, torch.randn_like(ctx.future), sched50)
    with pytest.raises(ValueError):
        partial_noise(noised, 4, torch.randn_like(ctx.future), sched50)


def test_posterior_fixed_point_when_alpha_bar_constant():
    # Degenerate hand-built schedule with equal alpha_bar at t-1 and t:
    # the posterior mean must collapse onto x_t regardless of x0_hat.
    alpha = torch.tensor([1.0, 0.5, 1.0, 0.4], dtype=torch.float64)
    abar = torch.tensor([1.0, 0.5, 0.5, 0.2], dtype=torch.float64)
    sched = NoiseSchedule(T=3, kind="test", alpha=alpha, alpha_bar=abar, beta=1 - alpha)
    x_t = torch.randn(4, 3, generator=torch.Generator().manual_seed(8))
    x0_hat = torch.randn(4, 3, generator=torch.Generator().manual_seed(9))
    out = posterior_sample(x_t, x0_hat, 2, sched, noise=torch.zeros_like(x_t))
    assert torch.allclose(out, x_t, atol=1e-6)


def test_posterior_final_step_deterministic(sched50):
    g = torch.Generator().manual_seed(10)
    x1 = torch.randn(3, 5, generator=g)
    x0_hat = torch.randn(3, 5, generator=g)
    a = posterior_sample(x1, x0_hat, 1, sched50)
    b = posterior_sample(x1, x0_hat, 1, sched50)
    assert torch.equal(a, b)
    with pytest.raises(ValueError):
        posterior_sample(x1, x0_hat, 2, sched50, noise=None)


def test_oracle_denoiser_chain_recovers_target(sched50):
    g = torch.Generator().manual_seed(11)
    target = torch.randn(20, 12, generator=g)
    oracle = lambda music, past, x, t: target
    out = sample_window(
        oracle, torch.zeros(4, 3), torch.zeros(4, 12), sched50,
        torch.Generator().manual_seed(12), future_len=20,
    )
    rel = float((out - target).norm() / target.norm())
    assert rel < 0.05


def test_sample_window_deterministic_and_shaped(sched50):
    oracle = lambda music, past, x, t: x * 0.9
    out1 = sample_window(
        oracle, torch.zeros(4, 3), torch.zeros(4, 7), sched50,
        torch.Generator().manual_seed(13), future_len=20,
    )
    out2 = sample_window(
        oracle, torch.zeros(4, 3), torch.zeros(4, 7), sched50,
        torch.Generator().manual_seed(13), future_len=20,
    )
    assert out1.shape == (20, 7)
    assert torch.equal(out1, out2)


def test_sample_window_rejects_bad_denoiser_shape(sched50):
    bad = lambda music, past, x, t: x[:-1]
    with pytest.raises(ValueError):
        sample_window(
            bad, torch.zeros(4, 3), torch.zeros(4, 7), sched50,
            torch.Generator().manual_seed(14),
        )
