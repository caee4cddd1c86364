"""Rank estimator - number of support points of discrete heterogeneity.

The ratio matrix

    M[x3, x2] = f(a3, a2, a1, x3, x2 | x1) / (F(x3; x2, a2) F(x2; x1, a1))

factors through the type space, so its rank is the number of types when
the type CCP vectors are linearly independent. The rank is read off the
singular values with a relative (population) or absolute (sample) cut.
"""

import logging

import numpy as np

from ddcsieve.conf import ddcsieve_settings
from ddcsieve.domain.model import TransitionKernel
from ddcsieve.domain.operators import RankConditioning, RatioMatrix
from ddcsieve.domain.panel import Panel
from ddcsieve.exceptions import DDCError
from ddcsieve.services.population import population_joint

logger = logging.getLogger(__name__)

__all__ = [
    "population_joint",
    "sample_joint",
    "build_ratio_matrix",
    "singular_values",
    "estimate_rank",
]


def sample_joint(panel: Panel, x1: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Cell frequencies of (a1, x2, a2, x3, a3) over periods 1-3 among
    individuals starting at x1.

    Returns (joint, counts), both indexed [a1, x2, a2, x3, a3].
    """
    if panel.periods < 3:
        raise DDCError("PANEL_INVALID", "Need at least three periods", periods=panel.periods)
    rows = panel.states[:, 0] == x1
    num = int(rows.sum())
    A, S = panel.num_actions, panel.grid.size
    counts = np.zeros((A, S, A, S, A), dtype=np.int64)
    if num == 0:
        logger.warning("sample_joint: no individual starts at state %d", x1)
        return counts.astype(float), counts
    x, a = panel.states[rows], panel.actions[rows]
    np.add.at(counts, (a[:, 0], x[:, 1], a[:, 1], x[:, 2], a[:, 2]), 1)
    return counts / num, counts


def build_ratio_matrix(
    joint: np.ndarray,
    kernel: TransitionKernel,
    conditioning: RankConditioning,
    x2_states=None,
    x3_states=None,
    floor: float | None = None,
    counts: np.ndarray | None = None,
    min_count: int | None = None,
) -> RatioMatrix:
    """
    M = joint / (F F) on the retained cells.

    x2 columns are kept where F(x2; x1, a1) > floor; x3 rows where every
    retained cell has F(x3; x2, a2) > floor and, when counts are given
    (sample mode), at least min_count observations.

    Raises:
        DDCError: EMPTY_MATRIX if no cell survives
    """
    floor = ddcsieve_settings.RATIO_FLOOR if floor is None else floor
    c = conditioning
    num_states = kernel.num_states
    x2_all = np.arange(num_states) if x2_states is None else np.asarray(x2_states, dtype=np.int64)
    x3_all = np.arange(num_states) if x3_states is None else np.asarray(x3_states, dtype=np.int64)

    f2 = kernel.probs[c.a1, c.x1, x2_all]
    x2_kept = x2_all[f2 > floor]
    f3 = kernel.probs[c.a2][np.ix_(x2_kept, x3_all)].T
    ok = f3 > floor
    if counts is not None:
        min_count = ddcsieve_settings.RANK_MIN_CELL_COUNT if min_count is None else min_count
        ok &= counts[c.a1, x2_kept, c.a2][:, x3_all, c.a3].T >= min_count
    row_ok = ok.all(axis=1) if x2_kept.size else np.zeros(x3_all.size, dtype=bool)
    x3_kept = x3_all[row_ok]
    if x2_kept.size == 0 or x3_kept.size == 0:
        raise DDCError("EMPTY_MATRIX", conditioning=str(conditioning), floor=floor)

    cell = joint[c.a1, x2_kept, c.a2][:, x3_kept, c.a3].T
    denom = kernel.probs[c.a2][np.ix_(x2_kept, x3_kept)].T * kernel.probs[c.a1, c.x1, x2_kept][None, :]
    values = cell / denom
    if not np.all(np.isfinite(values)):
        raise DDCError("NUMERIC_ERROR", "Non-finite ratio entry", conditioning=str(conditioning))
    logger.debug("build_ratio_matrix: kept %d x3 rows, %d x2 columns", x3_kept.size, x2_kept.size)
    return RatioMatrix(
        values=values,
        x3_states=tuple(map(int, x3_kept)),
        x2_states=tuple(map(int, x2_kept)),
        conditioning=conditioning,
        mode="population" if counts is None else "sample",
    )


def singular_values(M: RatioMatrix | np.ndarray) -> np.ndarray:
    """Singular values in decreasing order."""
    values = M.values if isinstance(M, RatioMatrix) else np.asarray(M, dtype=float)
    if values.size == 0:
        raise DDCError("EMPTY_MATRIX")
    return np.linalg.svd(values, compute_uv=False)


def estimate_rank(
    M: RatioMatrix | np.ndarray,
    rel_threshold: float | None = None,
    abs_threshold: float | None = None,
) -> int:
    """
    Number of singular values above the cut.

    sigma_r / sigma_1 > rel_threshold by default; sigma_r > abs_threshold
    when an absolute cut is given. A zero matrix has rank 0.
    """
    sv = singular_values(M)
    if sv[0] == 0.0:
        return 0
    if abs_threshold is not None:
        return int((sv > abs_threshold).sum())
    rel = ddcsieve_settings.RANK_REL_THRESHOLD if rel_threshold is None else rel_threshold
    return int((sv / sv[0] > rel).sum())
