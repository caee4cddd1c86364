"""Pytest fixtures for DDCSieve tests."""

import numpy as np
import pytest

from ddcsieve.domain import ModelSpec, PayoffParams
from ddcsieve.domain.panel import MixtureComponent, MixtureSpec, PointMass
from ddcsieve.services import model as model_service
from ddcsieve.services import simulator

# x1 carries the random coefficient, x2 the homogeneous one
AXES = [[-2.0, -1.0, 0.0, 1.0, 2.0], [-1.0, 0.0, 1.0]]
DRIFT = [[0.0, 0.0], [0.0, -0.5]]
GAMMA = np.array([0.5])


def state_index(x1: float, x2: float) -> int:
    return AXES[0].index(x1) * len(AXES[1]) + AXES[1].index(x2)


def point_masses(betas, weights=None) -> MixtureSpec:
    weights = weights or [1.0 / len(betas)] * len(betas)
    return MixtureSpec(tuple(MixtureComponent(w, PointMass((b,))) for b, w in zip(betas, weights, strict=True)))


@pytest.fixture
def spec():
    """Two actions, two state dimensions, one random slope, rho = 0.9."""
    return ModelSpec(num_actions=2, state_dim=2, discount=0.9, random_coef_count=1)


@pytest.fixture
def static_spec():
    """Same layout with rho = 0."""
    return ModelSpec(num_actions=2, state_dim=2, discount=0.0, random_coef_count=1)


@pytest.fixture
def kernel():
    """15-state AR(1) kernel; action 1 pushes x2 down."""
    return model_service.ar1_kernel(AXES, persistence=0.6, innovation_sd=0.8, drift=DRIFT)


@pytest.fixture
def grid(kernel):
    return kernel.grid


@pytest.fixture
def params():
    return PayoffParams(GAMMA, [1.0])


@pytest.fixture
def init_dist(grid):
    return model_service.uniform_init(grid)


@pytest.fixture
def two_type_panel(spec, kernel, init_dist):
    """n=200, T=4 panel from a 50/50 mix of beta = -1 and beta = 1.5."""
    betas = simulator.draw_types(point_masses([-1.0, 1.5]), 200, seed=7)
    return simulator.simulate_panel(spec, GAMMA, kernel, betas, 4, init_dist, seed=11)


@pytest.fixture
def indifferent_panel(spec, kernel, init_dist):
    """beta = gamma = 0: both actions have probability 1/2 everywhere."""
    betas = np.zeros((2000, 1))
    return simulator.simulate_panel(spec, [0.0], kernel, betas, 8, init_dist, seed=3)
