import numpy as np
import pytest
import torch

from longdance.denoiser import DenoiserConfig, DenoiserNet
from longdance.diffusion import make_schedule
from longdance.motion import FrameLayout
from longdance.skeleton import default_skeleton, toy_skeleton


@pytest.fixture
def skel_toy():
    return toy_skeleton()


@pytest.fixture
def skel24():
    return default_skeleton()


@pytest.fixture
def layout_toy(skel_toy):
    return FrameLayout(num_joints=skel_toy.num_joints, num_contacts=skel_toy.num_feet)


@pytest.fixture
def layout24(skel24):
    return FrameLayout(num_joints=skel24.num_joints, num_contacts=skel24.num_feet)


@pytest.fixture
def sched50():
    return make_schedule(T=50, kind="cosine")


@pytest.fixture
def tiny_config(layout_toy):
    # Small windows keep forward passes cheap in unit tests.
    return DenoiserConfig(
        motion_dim=layout_toy.width,
        music_dim=12,
        num_contacts=layout_toy.num_contacts,
        model_width=32,
        num_heads=2,
        num_blocks=2,
        music_window=24,
        past_window=12,
        future_window=6,
    )


@pytest.fixture
def tiny_model(tiny_config):
    torch.manual_seed(7)
    return DenoiserNet(tiny_config)


def finite_diff_grad(fn, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Central finite differences of a scalar function w.r.t. every entry of x."""
    x = x.detach().clone()
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        fp = float(fn(x))
        flat[i] = orig - eps
        fm = float(fn(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


def grad_rel_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    denom = max(float(numeric.norm()), 1e-12)
    return float((analytic - numeric).norm()) / denom


def random_rotation_matrices(rng: np.random.Generator, n: int) -> np.ndarray:
    """Independent oracle for random rotations: unit quaternions -> matrices."""
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((n, 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m
