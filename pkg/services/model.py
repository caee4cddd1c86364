"""Model core - payoffs, grids, kernels and invariant checks."""

import itertools
import logging

import numpy as np
from scipy import special

from ddcsieve.domain.model import ModelSpec, PayoffParams, StateGrid, TransitionKernel
from ddcsieve.exceptions import DDCError
from ddcsieve.gates import Gates, Violation

logger = logging.getLogger(__name__)


def _check_params(spec: ModelSpec, params: PayoffParams) -> None:
    found = list(Gates._param_dimensions(spec, params))
    if found:
        raise DDCError("DIMENSION_MISMATCH", "Payoff parameters do not match the layout", violations=[str(v) for v in found])


def _action_coefficients(spec: ModelSpec, params: PayoffParams, a: int) -> tuple[float, np.ndarray, np.ndarray]:
    """(intercept, beta slopes, gamma block) of inside action a >= 1."""
    c, g = spec.coef_per_action, spec.gamma_per_action
    block = params.beta[(a - 1) * c : a * c]
    intercept = float(block[0]) if spec.intercept_mode else 0.0
    slopes = block[1:] if spec.intercept_mode else block
    return intercept, slopes, params.gamma[(a - 1) * g : a * g]


def period_payoff(spec: ModelSpec, params: PayoffParams, x, a: int) -> float:
    """
    u(x, a) = x'(beta_a, gamma_a) (+ intercept); exactly 0 for the outside good.

    Raises:
        DDCError: DIMENSION_MISMATCH if x or the parameters do not fit the layout
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != spec.state_dim:
        raise DDCError("DIMENSION_MISMATCH", "State vector length differs from state_dim", got=x.size, expected=spec.state_dim)
    if not 0 <= a < spec.num_actions:
        raise DDCError("DIMENSION_MISMATCH", "Action out of range", action=a, num_actions=spec.num_actions)
    _check_params(spec, params)
    if a == 0:
        return 0.0
    intercept, slopes, gamma_a = _action_coefficients(spec, params, a)
    p = spec.random_slope_count
    return intercept + float(x[:p] @ slopes) + float(x[p:] @ gamma_a)


def payoff_matrix(spec: ModelSpec, params: PayoffParams, grid: StateGrid) -> np.ndarray:
    """u over the whole grid, shape (S, num_actions); column 0 is zero."""
    if grid.dim != spec.state_dim:
        raise DDCError("DIMENSION_MISMATCH", "Grid dimension differs from state_dim", got=grid.dim, expected=spec.state_dim)
    _check_params(spec, params)
    p = spec.random_slope_count
    u = np.zeros((grid.size, spec.num_actions))
    for a in range(1, spec.num_actions):
        intercept, slopes, gamma_a = _action_coefficients(spec, params, a)
        u[:, a] = intercept + grid.points[:, :p] @ slopes + grid.points[:, p:] @ gamma_a
    return u


def validate(spec: ModelSpec, grid: StateGrid, kernel: TransitionKernel) -> list[Violation]:
    """Every violated model invariant; empty list when the model is well-formed."""
    found = Gates.model_violations(spec, grid, kernel)
    if found:
        logger.info("validate: %d violation(s): %s", len(found), ", ".join(map(str, found)))
    return found


def product_grid(axes) -> StateGrid:
    """Cartesian product of per-dimension axis values (last axis fastest)."""
    return StateGrid(np.array(list(itertools.product(*[list(map(float, ax)) for ax in axes]))))


def project_state(grid: StateGrid, x) -> int:
    """Nearest-grid projection of a continuous state vector."""
    return grid.nearest(x)


def _axis_probs(axis: np.ndarray, mean: float, sd: float) -> np.ndarray:
    edges = (axis[1:] + axis[:-1]) / 2.0
    cdf = special.ndtr((edges - mean) / sd)
    return np.diff(np.concatenate([[0.0], cdf, [1.0]]))


def ar1_kernel(axes, persistence=0.6, innovation_sd=0.8, drift=None, num_actions: int = 2) -> TransitionKernel:
    """
    Discretized AR(1) transition on a product grid.

    Each coordinate moves to c + phi (x - c) + drift[a] + sd * eps around the
    axis midpoint c; mass is assigned to axis points by the normal CDF over
    midpoint bin edges, coordinates are independent.
    """
    axes = [np.sort(np.asarray(ax, dtype=float)) for ax in axes]
    k = len(axes)
    phi = np.broadcast_to(np.asarray(persistence, dtype=float), (k,))
    sd = np.broadcast_to(np.asarray(innovation_sd, dtype=float), (k,))
    drift = np.zeros((num_actions, k)) if drift is None else np.asarray(drift, dtype=float).reshape(num_actions, k)
    grid = product_grid(axes)
    centers = np.array([(ax[0] + ax[-1]) / 2.0 for ax in axes])
    probs = np.empty((num_actions, grid.size, grid.size))
    for a in range(num_actions):
        for s, x in enumerate(grid.points):
            mean = centers + phi * (x - centers) + drift[a]
            row = np.ones(1)
            for d in range(k):
                row = np.outer(row, _axis_probs(axes[d], mean[d], sd[d])).ravel()
            probs[a, s] = row / row.sum()
    return TransitionKernel(probs, grid)


def uniform_init(grid: StateGrid) -> np.ndarray:
    return np.full(grid.size, 1.0 / grid.size)
