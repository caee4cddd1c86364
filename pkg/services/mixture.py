"""Mixture estimator - fixed-grid sieve maximum likelihood with a profiled gamma search.

For fixed gamma the weights solve a concave problem on the simplex (per
x1 cell), handled by EM. The outer search over gamma is derivative-free:
bounded Brent/golden-section for scalar gamma, bounded Nelder-Mead
otherwise. Transition densities do not depend on (gamma, f) and are left
out of the likelihood.
"""

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy import integrate, optimize

from ddcsieve.conf import ddcsieve_settings, resolve_n_jobs
from ddcsieve.domain.model import ModelSpec, PayoffParams
from ddcsieve.domain.panel import Panel
from ddcsieve.domain.sieve import (
    EstimateDiagnostics,
    EstimateResult,
    GridConfig,
    SearchConfig,
    SearchRecord,
    SieveDistribution,
    StepCdf,
    TransitionEstimate,
    X1Partition,
)
from ddcsieve.exceptions import DDCError
from ddcsieve.gates import GateError, Gates
from ddcsieve.services.solver import SolutionCache, solve_ccp_stack
from ddcsieve.signals import estimation_completed

logger = logging.getLogger(__name__)


def grid_rule(n: int) -> int:
    """B(n) = ceil(4 n^(1/4))."""
    if n < 1:
        raise DDCError("CONFIG_INVALID", "Sample size must be positive", n=n)
    return math.ceil(4.0 * n**0.25 - 1e-9)


def beta_grid(size: int, support) -> np.ndarray:
    """
    Equally spaced grid over the beta support box, shape (B, d).

    For d > 1 a product grid with ceil(size^(1/d)) points per coordinate.
    """
    support = [tuple(map(float, s)) for s in support]
    if len(support) == 1:
        lo, hi = support[0]
        return np.linspace(lo, hi, size)[:, None]
    per_dim = math.ceil(size ** (1.0 / len(support)) - 1e-9)
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in support]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(support))


# =============================================================================
# Likelihood matrix
# =============================================================================


@dataclass(frozen=True, eq=False)
class LikelihoodMatrix:
    """
    L[i, j] = prod_t P_t(a_it; x_it, b_j), stored as exp(log L - log_shift[i]).

    Each row is max-shifted so its largest entry is 1.
    """

    values: np.ndarray
    log_shift: np.ndarray
    max_solver_residual: float = 0.0

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.values) + self.log_shift[:, None]


def _solve_point(j: int, spec: ModelSpec, gamma, beta, kernel, periods: int, tol, max_iter):
    try:
        return solve_ccp_stack(spec, PayoffParams(gamma, beta), kernel, periods, tol=tol, max_iter=max_iter)
    except DDCError as exc:
        raise DDCError("SOLVER_FAILED", grid_point=j, beta=np.asarray(beta).tolist(), cause=exc.code) from exc


def panel_log_likelihood(stack: np.ndarray, panel: Panel) -> np.ndarray:
    """sum_t log P_t(a_it; x_it) per individual for one type's CCP stack."""
    log_stack = np.log(stack)
    t_index = np.arange(panel.periods)[None, :]
    return log_stack[t_index, panel.states, panel.actions].sum(axis=1)


def type_likelihood_matrix(
    spec: ModelSpec,
    panel: Panel,
    kernel_est: TransitionEstimate,
    gamma,
    grid: np.ndarray,
    cache: SolutionCache | None = None,
    n_jobs: int | None = None,
) -> LikelihoodMatrix:
    """
    Per-individual, per-grid-point likelihood of the observed choices.

    Raises:
        DDCError: SOLVER_FAILED naming the grid point whose solve failed
    """
    grid = np.asarray(grid, dtype=float).reshape(len(grid), -1)
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    kernel = kernel_est.kernel
    cache = cache or SolutionCache(spec, kernel)
    n_jobs = resolve_n_jobs(n_jobs)

    keys = [cache.key(PayoffParams(gamma, b), panel.periods) for b in grid]
    missing = [j for j, key in enumerate(keys) if key not in cache]
    if missing:
        solved = Parallel(n_jobs=n_jobs)(
            delayed(_solve_point)(j, spec, gamma, grid[j], kernel, panel.periods, cache.tol, cache.max_iter)
            for j in missing
        )
        for j, result in zip(missing, solved, strict=True):
            cache.put(keys[j], result)

    stacks = [cache.get(PayoffParams(gamma, b), panel.periods) for b in grid]
    log_l = np.column_stack([panel_log_likelihood(stack, panel) for stack, _ in stacks])
    shift = log_l.max(axis=1)
    return LikelihoodMatrix(
        values=np.exp(log_l - shift[:, None]),
        log_shift=shift,
        max_solver_residual=max(res for _, res in stacks),
    )


# =============================================================================
# Inner weight solve (EM)
# =============================================================================


@dataclass(frozen=True, eq=False)
class InnerSolve:
    weights: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    trace: tuple[tuple[float, ...], ...]


def inner_weight_solve(
    L: np.ndarray,
    cell_assignment: np.ndarray | None = None,
    init_weights: np.ndarray | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    sample_weights: np.ndarray | None = None,
    log_shift: np.ndarray | None = None,
) -> InnerSolve:
    """
    Maximize sum_i w_i log sum_j P[j, k(i)] L[i, j] over the simplex per x1 cell.

    EM fixed point P_j <- mean_{i in k} P_j L_ij / sum_j' P_j' L_ij'. Stops
    when the relative log-likelihood gain drops below tol. The log-likelihood
    never decreases (checked every iteration).

    Raises:
        DDCError: NUMERIC_ERROR on a non-finite update, EM_NOT_MONOTONE on a decrease
    """
    L = np.asarray(L, dtype=float)
    n, size = L.shape
    tol = ddcsieve_settings.EM_TOL if tol is None else tol
    max_iter = ddcsieve_settings.EM_MAX_ITER if max_iter is None else max_iter
    assign = np.zeros(n, dtype=np.int64) if cell_assignment is None else np.asarray(cell_assignment)
    if init_weights is None:
        num_cells = int(assign.max()) + 1 if n else 1
        init_weights = np.full((size, num_cells), 1.0 / size)
    weights = np.array(init_weights, dtype=float).reshape(size, -1)
    w = np.ones(n) if sample_weights is None else np.asarray(sample_weights, dtype=float)
    shift = np.zeros(n) if log_shift is None else np.asarray(log_shift, dtype=float)

    total_ll, total_iter, converged, traces = 0.0, 0, True, []
    for k in range(weights.shape[1]):
        rows = assign == k
        if not rows.any():
            traces.append(())
            continue
        Lk, wk = L[rows], w[rows]
        offset = float(wk @ shift[rows])
        P = weights[:, k]
        mix = Lk @ P
        ll = float(wk @ np.log(mix)) + offset
        trace = [ll]
        done = False
        for _ in range(max_iter):
            P_new = (wk @ (Lk * (P / mix[:, None]))) / wk.sum()
            P_new = P_new / P_new.sum()
            mix_new = Lk @ P_new
            ll_new = float(wk @ np.log(mix_new)) + offset
            if not np.isfinite(ll_new) or not np.all(np.isfinite(P_new)):
                raise DDCError("NUMERIC_ERROR", "Non-finite EM update", cell=k)
            if ll_new < ll - 1e-12 * max(1.0, abs(ll)):
                raise DDCError("EM_NOT_MONOTONE", cell=k, before=ll, after=ll_new)
            gain = (ll_new - ll) / max(abs(ll), np.finfo(float).tiny)
            P, mix, ll = P_new, mix_new, ll_new
            trace.append(ll)
            if gain < tol:
                done = True
                break
        weights[:, k] = P
        total_ll += ll
        total_iter += len(trace) - 1
        converged = converged and done
        traces.append(tuple(trace))

    if not converged:
        logger.warning("inner_weight_solve: EM stopped at max_iter=%d before reaching tol=%.1e", max_iter, tol)
    return InnerSolve(weights, total_ll, total_iter, converged, tuple(traces))


# =============================================================================
# Profile objective and outer search
# =============================================================================


@dataclass(frozen=True, eq=False)
class ProfileResult:
    loglik: float
    weights: np.ndarray
    inner_iterations: int
    max_solver_residual: float


def profile_objective(
    spec: ModelSpec,
    panel: Panel,
    kernel_est: TransitionEstimate,
    grid: np.ndarray,
    gamma,
    partition: X1Partition | None = None,
    cache: SolutionCache | None = None,
    inner_tol: float | None = None,
    inner_max_iter: int | None = None,
    n_jobs: int | None = None,
) -> ProfileResult:
    """Max over sieve weights of the log-likelihood at this gamma, with the maximizing weights."""
    partition = partition or X1Partition.single(panel.grid.size)
    lik = type_likelihood_matrix(spec, panel, kernel_est, gamma, grid, cache=cache, n_jobs=n_jobs)
    inner = inner_weight_solve(
        lik.values,
        partition.assign(panel.initial_states),
        np.full((lik.values.shape[1], partition.size), 1.0 / lik.values.shape[1]),
        tol=inner_tol,
        max_iter=inner_max_iter,
        log_shift=lik.log_shift,
    )
    return ProfileResult(inner.loglik, inner.weights, inner.iterations, lik.max_solver_residual)


def _cell_mass(partition: X1Partition, panel: Panel) -> np.ndarray:
    counts = np.bincount(partition.assign(panel.initial_states), minlength=partition.size)
    return counts / counts.sum()


def estimate(
    spec: ModelSpec,
    panel: Panel,
    kernel_est: TransitionEstimate,
    grid_config: GridConfig | None = None,
    search_config: SearchConfig | None = None,
    inner_tol: float | None = None,
    inner_max_iter: int | None = None,
    active_threshold: float | None = None,
    n_jobs: int | None = None,
) -> EstimateResult:
    """
    Profile sieve MLE: maximize the profiled log-likelihood over gamma in the box.

    Returns the best evaluated (gamma_hat, f_hat). If the search budget runs out
    the best-so-far is returned with search_converged=False.
    """
    try:
        Gates.panel_shape(panel)
    except GateError as exc:
        raise DDCError("PANEL_INVALID", exc.message, **exc.details) from exc
    started = time.perf_counter()
    grid_config = grid_config or GridConfig()
    search_config = search_config or SearchConfig()
    size = grid_config.size or grid_rule(panel.n)
    grid = beta_grid(size, grid_config.beta_support)
    partition = X1Partition(grid_config.x1_cells) if grid_config.x1_cells else X1Partition.single(panel.grid.size)
    cache = SolutionCache(spec, kernel_est.kernel)
    box = np.asarray(search_config.gamma_box, dtype=float).reshape(-1, 2)
    max_evals = search_config.max_evals or ddcsieve_settings.SEARCH_MAX_EVALS
    xtol = search_config.xtol or ddcsieve_settings.SEARCH_XTOL

    evaluations: list[tuple[np.ndarray, ProfileResult]] = []

    def objective(g) -> float:
        g = np.clip(np.atleast_1d(np.asarray(g, dtype=float)), box[:, 0], box[:, 1])
        res = profile_objective(
            spec, panel, kernel_est, grid, g, partition, cache, inner_tol, inner_max_iter, n_jobs=n_jobs
        )
        evaluations.append((g, res))
        logger.debug("estimate: gamma=%s loglik=%.6f", g.tolist(), res.loglik)
        return -res.loglik

    if box.shape[0] == 1:
        outcome = optimize.minimize_scalar(
            objective,
            bounds=tuple(box[0]),
            method="bounded",
            options={"xatol": xtol, "maxiter": max_evals},
        )
    else:
        start = np.asarray(search_config.start, dtype=float) if search_config.start else box.mean(axis=1)
        outcome = optimize.minimize(
            objective,
            start,
            method="Nelder-Mead",
            bounds=[tuple(b) for b in box],
            options={"maxfev": max_evals, "xatol": xtol, "fatol": 1e-8},
        )
    converged = bool(outcome.success)
    if not converged:
        logger.warning("estimate: gamma search stopped before convergence (%s)", outcome.message)

    best_gamma, best = max(evaluations, key=lambda p: p[1].loglik)
    sieve = SieveDistribution(grid, best.weights, partition, _cell_mass(partition, panel))
    result = EstimateResult(
        gamma_hat=best_gamma,
        sieve=sieve,
        loglik=best.loglik,
        active_types=count_active_types(sieve, active_threshold),
        diagnostics=EstimateDiagnostics(
            search_evaluations=len(evaluations),
            search_converged=converged,
            inner_iterations=sum(p.inner_iterations for _, p in evaluations),
            max_solver_residual=max(p.max_solver_residual for _, p in evaluations),
            elapsed_seconds=time.perf_counter() - started,
            trace=tuple(SearchRecord(tuple(map(float, g)), p.loglik) for g, p in evaluations),
            empty_transition_cells=len(kernel_est.empty_cells),
        ),
    )
    logger.info(
        "estimate: n=%d B=%d gamma_hat=%s loglik=%.4f types=%d (%d evaluations)",
        panel.n,
        size,
        result.gamma_hat.tolist(),
        result.loglik,
        result.active_types,
        len(evaluations),
    )
    estimation_completed.send(sender=EstimateResult, result=result)
    return result


# =============================================================================
# CDF and error metrics
# =============================================================================


def estimated_cdf(sieve: SieveDistribution, x1_cell: int | None = None) -> StepCdf:
    """Step CDF sum_j P[j, k] 1(b_j <= b) for one x1 cell (None = mixed over cells)."""
    if sieve.grid.shape[1] != 1:
        raise DDCError("DIMENSION_MISMATCH", "Step CDF needs a scalar beta", dim=sieve.grid.shape[1])
    jumps = sieve.marginal_weights() if x1_cell is None else sieve.weights[:, x1_cell]
    return StepCdf(sieve.grid[:, 0], jumps)


def error_metrics(estimated: StepCdf, true_cdf, support: tuple[float, float] | None = None, tol: float | None = None):
    """
    (IAE, ISE) = (int |F_hat - F| db, int (F_hat - F)^2 db) over a bounded support.

    The estimate is constant between its jump points, so the range is split
    at the union of both CDFs' jumps and each piece is integrated adaptively.
    """
    tol = ddcsieve_settings.INTEGRATION_TOL if tol is None else tol
    truth = true_cdf.cdf if hasattr(true_cdf, "cdf") else true_cdf
    if support is None:
        lo, hi = estimated.support
        if hasattr(true_cdf, "support"):
            t_lo, t_hi = true_cdf.support
            lo, hi = min(lo, t_lo), max(hi, t_hi)
    else:
        lo, hi = support
    cuts = [lo, hi, *estimated.breakpoints, *getattr(true_cdf, "breakpoints", ())]
    edges = np.unique(np.clip(np.asarray(cuts, dtype=float), lo, hi))

    iae = ise = 0.0
    for left, right in zip(edges[:-1], edges[1:], strict=True):
        level = float(estimated(0.5 * (left + right)))
        iae += integrate.quad(lambda b, level=level: abs(level - float(truth(b))), left, right, epsabs=tol, limit=200)[0]
        ise += integrate.quad(lambda b, level=level: (level - float(truth(b))) ** 2, left, right, epsabs=tol, limit=200)[0]
    return iae, ise


def count_active_types(sieve: SieveDistribution, threshold: float | None = None) -> int:
    """Grid points whose mass (mixed over x1 cells) exceeds the threshold."""
    threshold = ddcsieve_settings.ACTIVE_TYPE_THRESHOLD if threshold is None else threshold
    return int((sieve.marginal_weights() > threshold).sum())
