"""Simulator - type draws and panel simulation.

Randomness is seeded per individual from (seed, i) so serial and parallel
runs produce bit-identical panels.
"""

import logging

import numpy as np
from joblib import Parallel, delayed

from ddcsieve.conf import resolve_n_jobs
from ddcsieve.domain.model import ModelSpec, PayoffParams, TransitionKernel
from ddcsieve.domain.panel import MixtureSpec, Panel
from ddcsieve.exceptions import DDCError
from ddcsieve.gates import GateError, Gates
from ddcsieve.services.solver import SolutionCache

logger = logging.getLogger(__name__)


def draw_types(mix: MixtureSpec, n: int, seed: int) -> np.ndarray:
    """
    n i.i.d. beta draws, shape (n, d).

    Component labels first, then one uniform per coordinate pushed through
    the component's inverse CDF on its truncation interval.
    """
    try:
        Gates.mixture(mix)
    except GateError as exc:
        raise DDCError("CONFIG_INVALID", exc.message, **exc.details) from exc
    rng = np.random.default_rng(seed)
    labels = rng.choice(len(mix.components), size=n, p=mix.weights / mix.weights.sum())
    uniforms = rng.random((n, mix.dim))
    betas = np.empty((n, mix.dim))
    for c, comp in enumerate(mix.components):
        rows = labels == c
        if rows.any():
            betas[rows] = comp.family.ppf(uniforms[rows])
    return betas


def _draw(cum: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cum, u, side="right")), cum.size - 1)


def _simulate_block(
    ids: np.ndarray,
    type_index: np.ndarray,
    stacks: list[np.ndarray],
    kernel_cum: np.ndarray,
    init_cum: np.ndarray,
    periods: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    states = np.empty((ids.size, periods), dtype=np.int64)
    actions = np.empty((ids.size, periods), dtype=np.int64)
    for row, i in enumerate(ids):
        rng = np.random.default_rng([seed, int(i)])
        draws = rng.random(2 * periods)
        ccps = stacks[type_index[i]]
        x = _draw(init_cum, draws[0])
        for t in range(periods):
            a = _draw(np.cumsum(ccps[t, x]), draws[2 * t + 1])
            states[row, t] = x
            actions[row, t] = a
            if t + 1 < periods:
                x = _draw(kernel_cum[a, x], draws[2 * t + 2])
    return states, actions


def simulate_panel(
    spec: ModelSpec,
    gamma,
    kernel: TransitionKernel,
    betas: np.ndarray,
    periods: int,
    init_dist: np.ndarray,
    seed: int,
    n_jobs: int | None = None,
    cache: SolutionCache | None = None,
) -> Panel:
    """
    Simulate (x_it, a_it): x_i1 ~ init_dist, a_it ~ CCP(. ; x_it, beta_i),
    x_i,t+1 ~ F(. | x_it, a_it).

    One solve per distinct beta (memoized on the bit pattern).

    Raises:
        ConvergenceError: Propagated from the solver
    """
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    if betas.shape[0] == 1 and betas.shape[1] != spec.random_coef_count:
        betas = betas.T
    n = betas.shape[0]
    cache = cache or SolutionCache(spec, kernel)

    keys: dict[bytes, int] = {}
    stacks: list[np.ndarray] = []
    type_index = np.empty(n, dtype=np.int64)
    for i, beta in enumerate(betas):
        key = beta.tobytes()
        if key not in keys:
            keys[key] = len(stacks)
            stacks.append(cache.get(PayoffParams(gamma, beta), periods)[0])
        type_index[i] = keys[key]
    logger.debug("simulate_panel: %d individuals, %d distinct types solved", n, len(stacks))

    kernel_cum = np.cumsum(kernel.probs, axis=2)
    init_cum = np.cumsum(np.asarray(init_dist, dtype=float))
    n_jobs = resolve_n_jobs(n_jobs)
    blocks = np.array_split(np.arange(n), max(1, min(n, 8 * max(abs(n_jobs), 1))))
    results = Parallel(n_jobs=n_jobs)(
        delayed(_simulate_block)(ids, type_index, stacks, kernel_cum, init_cum, periods, seed)
        for ids in blocks
        if ids.size
    )
    states = np.concatenate([r[0] for r in results])
    actions = np.concatenate([r[1] for r in results])
    return Panel(states, actions, kernel.grid, spec.num_actions)
