"""Transition estimator - first estimation step for F_x.

Two estimators:
    FrequencyEstimator: grid-cell counts (the MLE on a discrete grid)
    KernelDensityEstimator: Gaussian product-kernel conditional density,
                            evaluated on the grid and row-normalized

Empty (action, from) cells become uniform rows and are flagged.
"""

import logging

import numpy as np
from django.utils.module_loading import import_string
from scipy import special, stats

from ddcsieve.conf import ddcsieve_settings
from ddcsieve.domain.model import StateGrid, TransitionKernel
from ddcsieve.domain.panel import Panel
from ddcsieve.domain.sieve import TransitionEstimate
from ddcsieve.exceptions import DDCError
from ddcsieve.protocols.transition import TransitionEstimator

logger = logging.getLogger(__name__)


def _transitions(panel: Panel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(from, action, to) over all consecutive period pairs."""
    if panel.periods < 2:
        raise DDCError("PANEL_INVALID", "Need at least two periods to observe transitions", periods=panel.periods)
    return (
        panel.states[:, :-1].ravel(),
        panel.actions[:, :-1].ravel(),
        panel.states[:, 1:].ravel(),
    )


def estimate_frequency(panel: Panel, grid: StateGrid | None = None) -> TransitionEstimate:
    """F_hat(x' | x, a) = count(x -> x' under a) / count(x under a)."""
    grid = grid or panel.grid
    src, act, dst = _transitions(panel)
    counts = np.zeros((panel.num_actions, grid.size, grid.size))
    np.add.at(counts, (act, src, dst), 1.0)
    cell_counts = counts.sum(axis=2)

    empty = cell_counts == 0
    probs = np.where(empty[..., None], 1.0 / grid.size, counts / np.maximum(cell_counts, 1.0)[..., None])
    empty_cells = tuple((int(a), int(s)) for a, s in zip(*np.nonzero(empty), strict=True))
    if empty_cells:
        logger.warning("estimate_frequency: %d empty (action, state) cells filled with uniform rows", len(empty_cells))
    return TransitionEstimate(
        kernel=TransitionKernel(probs, grid),
        cell_counts=cell_counts.astype(np.int64),
        method="frequency",
        empty_cells=empty_cells,
    )


def silverman_bandwidth(values: np.ndarray) -> np.ndarray:
    """Per-dimension 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to 1.0 for a constant column."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n = values.shape[0]
    sd = values.std(axis=0, ddof=1) if n > 1 else np.zeros(values.shape[1])
    spread = stats.iqr(values, axis=0) / 1.34
    scale = np.where(spread > 0, np.minimum(sd, spread), sd)
    h = 0.9 * scale * n ** (-0.2)
    return np.where(h > 0, h, 1.0)


def _log_kernel(points: np.ndarray, obs: np.ndarray, h: np.ndarray) -> np.ndarray:
    """log K_h(point - obs) for a Gaussian product kernel, shape (len(points), len(obs))."""
    z = (points[:, None, :] - obs[None, :, :]) / h
    return (stats.norm.logpdf(z) - np.log(h)).sum(axis=2)


def estimate_kernel_density(
    panel: Panel,
    bandwidths: tuple | None = None,
    grid: StateGrid | None = None,
) -> TransitionEstimate:
    """
    F_hat(x'; x, a) = sum_i K_h'(x' - x_{t+1,i}) K_h(x - x_{t,i}) 1(a_it = a)
                      / sum_i K_h(x - x_{t,i}) 1(a_it = a)

    evaluated at grid points and row-normalized over x'. Sums are taken in
    log space so small bandwidths do not underflow. bandwidths is
    (h_next, h_from), each per dimension; Silverman's rule by default.
    """
    grid = grid or panel.grid
    if panel.periods < 2:
        raise DDCError("PANEL_INVALID", "Need at least two periods to observe transitions", periods=panel.periods)
    x_from = panel.values[:, :-1].reshape(-1, grid.dim)
    x_to = panel.values[:, 1:].reshape(-1, grid.dim)
    act = panel.actions[:, :-1].ravel()

    if bandwidths is None:
        h_next, h_from = silverman_bandwidth(x_to), silverman_bandwidth(x_from)
    else:
        h_next = np.broadcast_to(np.asarray(bandwidths[0], dtype=float), (grid.dim,))
        h_from = np.broadcast_to(np.asarray(bandwidths[1], dtype=float), (grid.dim,))

    probs = np.full((panel.num_actions, grid.size, grid.size), 1.0 / grid.size)
    cell_counts = np.zeros((panel.num_actions, grid.size), dtype=np.int64)
    empty_cells: list[tuple[int, int]] = []
    for a in range(panel.num_actions):
        rows = act == a
        if not rows.any():
            empty_cells.extend((a, s) for s in range(grid.size))
            continue
        log_from = _log_kernel(grid.points, x_from[rows], h_from)
        log_to = _log_kernel(grid.points, x_to[rows], h_next)
        nearest = np.argmin(((grid.points[:, None, :] - x_from[rows][None]) ** 2).sum(axis=2), axis=0)
        cell_counts[a] = np.bincount(nearest, minlength=grid.size)
        for s in range(grid.size):
            log_num = special.logsumexp(log_from[s][None, :] + log_to, axis=1)
            total = special.logsumexp(log_num)
            if not np.isfinite(total):
                empty_cells.append((a, s))
                continue
            probs[a, s] = np.exp(log_num - total)

    if empty_cells:
        logger.warning("estimate_kernel_density: %d zero-denominator cells filled with uniform rows", len(empty_cells))
    return TransitionEstimate(
        kernel=TransitionKernel(probs, grid),
        cell_counts=cell_counts,
        method="kernel_density",
        bandwidths=(tuple(map(float, h_next)), tuple(map(float, h_from))),
        empty_cells=tuple(empty_cells),
    )


class FrequencyEstimator:
    """TransitionEstimator backed by estimate_frequency."""

    method = "frequency"

    def estimate(self, panel: Panel, grid: StateGrid | None = None) -> TransitionEstimate:
        return estimate_frequency(panel, grid)


class KernelDensityEstimator:
    """TransitionEstimator backed by estimate_kernel_density."""

    method = "kernel_density"

    def __init__(self, bandwidths: tuple | None = None):
        self.bandwidths = bandwidths

    def estimate(self, panel: Panel, grid: StateGrid | None = None) -> TransitionEstimate:
        return estimate_kernel_density(panel, self.bandwidths, grid)


_METHODS = {
    "frequency": FrequencyEstimator,
    "kernel_density": KernelDensityEstimator,
}


def get_transition_estimator(method: str | None = None, bandwidths: tuple | None = None) -> TransitionEstimator:
    """Estimator by method name, else the TRANSITION_ESTIMATOR setting."""
    if method is not None:
        if method not in _METHODS:
            raise DDCError("CONFIG_INVALID", "Unknown transition estimation method", method=method)
        cls = _METHODS[method]
    else:
        cls = import_string(ddcsieve_settings.TRANSITION_ESTIMATOR)
    return cls(bandwidths) if cls is KernelDensityEstimator else cls()
