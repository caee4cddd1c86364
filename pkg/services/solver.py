"""Solver - integrated value functions and conditional choice probabilities.

Bellman operator with EV1 shocks:

    T(v)(x) = log sum_a exp(u(x, a) + rho sum_x' v(x') F(x' | x, a)) + EULER_GAMMA

Log-sum-exp is always max-shifted (scipy.special.logsumexp). Plain
successive approximation only: no relaxation, no policy iteration, so the
sup-norm contraction bound holds step by step.
"""

import logging
import threading

import numpy as np
from scipy import special

from ddcsieve.conf import ddcsieve_settings
from ddcsieve.domain.model import Horizon, ModelSpec, PayoffParams, TransitionKernel
from ddcsieve.domain.solution import CcpTable, ValueFunction
from ddcsieve.exceptions import ConvergenceError, DDCError
from ddcsieve.gates import GateError, Gates
from ddcsieve.services.model import payoff_matrix

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329

# Smallest CCP kept, so log-likelihoods stay finite under logit saturation.
PROB_FLOOR = np.finfo(float).tiny


def choice_values(spec: ModelSpec, u: np.ndarray, kernel: TransitionKernel, v: np.ndarray) -> np.ndarray:
    """w_a(x) = u(x, a) + rho E[v(x') | x, a], shape (S, A)."""
    continuation = np.einsum("ast,t->sa", kernel.probs, v)
    return u + spec.discount * continuation


def _apply(spec: ModelSpec, u: np.ndarray, kernel: TransitionKernel, v: np.ndarray) -> np.ndarray:
    out = special.logsumexp(choice_values(spec, u, kernel, v), axis=1) + EULER_GAMMA
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise DDCError("NUMERIC_ERROR", "Non-finite Bellman update", state=int(bad[0]))
    return out


def _check_contraction(spec: ModelSpec) -> None:
    try:
        Gates.discount_contraction(spec)
    except GateError as exc:
        raise DDCError("CONFIG_INVALID", exc.message, rho=spec.discount) from exc


def bellman_apply(spec: ModelSpec, params: PayoffParams, kernel: TransitionKernel, v: ValueFunction) -> ValueFunction:
    """One application of the Bellman operator."""
    u = payoff_matrix(spec, params, kernel.grid)
    return ValueFunction(_apply(spec, u, kernel, np.asarray(v.values, dtype=float)), horizon=v.horizon)


def solve_infinite(
    spec: ModelSpec,
    params: PayoffParams,
    kernel: TransitionKernel,
    tol: float | None = None,
    max_iter: int | None = None,
) -> ValueFunction:
    """
    Fixed point of the Bellman operator by successive approximation from v = 0.

    Returns v with ||T(v) - v||_inf <= tol. With rho = 0 the operator is
    constant and a single application is the fixed point.

    Raises:
        ConvergenceError: If max_iter is reached (carries the last residual)
        DDCError: CONFIG_INVALID for rho outside [0, 1), tol <= 0 or max_iter < 1
    """
    _check_contraction(spec)
    tol = ddcsieve_settings.SOLVER_TOL if tol is None else tol
    max_iter = ddcsieve_settings.SOLVER_MAX_ITER if max_iter is None else max_iter
    if not tol > 0.0:
        raise DDCError("CONFIG_INVALID", "Solver tolerance must be positive", tol=tol)
    if max_iter < 1:
        raise DDCError("CONFIG_INVALID", "Solver needs at least one iteration", max_iter=max_iter)
    u = payoff_matrix(spec, params, kernel.grid)

    v = np.zeros(kernel.num_states)
    if spec.discount == 0.0:
        return ValueFunction(_apply(spec, u, kernel, v), Horizon.infinite(), iterations=1, residual=0.0)

    residuals: list[float] = []
    for k in range(1, max_iter + 1):
        v_next = _apply(spec, u, kernel, v)
        residual = float(np.max(np.abs(v_next - v)))
        residuals.append(residual)
        v = v_next
        if residual <= tol:
            logger.debug("solve_infinite: converged in %d iterations (residual %.3e)", k, residual)
            return ValueFunction(v, Horizon.infinite(), iterations=k, residual=residual, residuals=tuple(residuals))

    raise ConvergenceError(max_iter, residuals[-1])


def solve_finite(
    spec: ModelSpec,
    params_per_period: list[PayoffParams],
    kernel_per_period: list[TransitionKernel],
    periods: int,
) -> ValueFunction:
    """
    Backward recursion from v_{T+1} = 0.

    Row t-1 of the result holds v_t = T_t(v_{t+1}).
    """
    if len(params_per_period) != periods or len(kernel_per_period) != periods:
        raise DDCError(
            "DIMENSION_MISMATCH",
            "Need one parameter set and one kernel per period",
            periods=periods,
            params=len(params_per_period),
            kernels=len(kernel_per_period),
        )
    num_states = kernel_per_period[0].num_states
    values = np.zeros((periods + 1, num_states))
    for t in range(periods - 1, -1, -1):
        u = payoff_matrix(spec, params_per_period[t], kernel_per_period[t].grid)
        values[t] = _apply(spec, u, kernel_per_period[t], values[t + 1])
    return ValueFunction(values[:periods], Horizon.finite(periods), iterations=periods)


def _ccp_from_values(spec: ModelSpec, u: np.ndarray, kernel: TransitionKernel, v: np.ndarray) -> np.ndarray:
    w = choice_values(spec, u, kernel, v)
    log_p = w - special.logsumexp(w, axis=1, keepdims=True)
    if not np.all(np.isfinite(log_p)):
        raise DDCError("NUMERIC_ERROR", "Non-finite choice probabilities")
    probs = np.maximum(np.exp(log_p), PROB_FLOOR)
    return probs / probs.sum(axis=1, keepdims=True)


def ccp(spec: ModelSpec, params: PayoffParams, kernel: TransitionKernel, v: ValueFunction | np.ndarray) -> CcpTable:
    """
    Logit CCPs P(a; x, b) = exp(w_a) / sum exp(w_a') given the continuation v.

    For the infinite horizon v is the fixed point; for period t of a finite
    horizon it is v_{t+1}.
    """
    values = v.values if isinstance(v, ValueFunction) else np.asarray(v, dtype=float)
    u = payoff_matrix(spec, params, kernel.grid)
    return CcpTable(_ccp_from_values(spec, u, kernel, values))


def ccp_finite(
    spec: ModelSpec,
    params_per_period: list[PayoffParams],
    kernel_per_period: list[TransitionKernel],
    v: ValueFunction,
) -> tuple[CcpTable, ...]:
    """Per-period CCPs of a finite-horizon solution; the last period is the static logit."""
    periods = v.values.shape[0]
    tables = []
    for t in range(periods):
        continuation = v.values[t + 1] if t + 1 < periods else np.zeros(v.values.shape[1])
        tables.append(ccp(spec, params_per_period[t], kernel_per_period[t], continuation))
    return tuple(tables)


def solve_ccp_stack(
    spec: ModelSpec,
    params: PayoffParams,
    kernel: TransitionKernel,
    periods: int,
    tol: float | None = None,
    max_iter: int | None = None,
) -> tuple[np.ndarray, float]:
    """
    CCPs for panel periods 1..periods, shape (periods, S, A), and the solver residual.

    Stationary parameters and kernel; the infinite-horizon table is repeated,
    the finite horizon uses the period-t backward-recursion CCP.
    """
    if spec.horizon.is_infinite:
        vf = solve_infinite(spec, params, kernel, tol=tol, max_iter=max_iter)
        table = ccp(spec, params, kernel, vf).probs
        return np.broadcast_to(table, (periods, *table.shape)).copy(), vf.residual

    horizon = spec.horizon.periods
    if periods > horizon:
        raise DDCError("UNSUPPORTED_HORIZON", "Panel is longer than the model horizon", periods=periods, horizon=horizon)
    vf = solve_finite(spec, [params] * horizon, [kernel] * horizon, horizon)
    tables = ccp_finite(spec, [params] * horizon, [kernel] * horizon, vf)
    return np.stack([tables[t].probs for t in range(periods)]), 0.0


class SolutionCache:
    """
    CCP stacks memoized on the exact bit pattern of (gamma, beta, periods).

    One cache per (model, kernel); shared across the gamma search so repeated
    evaluations and repeated grid points are solved once. Solver tolerances are
    resolved from settings at construction, so solves dispatched to worker
    processes use the same values as the caller.
    """

    def __init__(self, spec: ModelSpec, kernel: TransitionKernel, tol: float | None = None, max_iter: int | None = None):
        self.spec = spec
        self.kernel = kernel
        self.tol = ddcsieve_settings.SOLVER_TOL if tol is None else tol
        self.max_iter = ddcsieve_settings.SOLVER_MAX_ITER if max_iter is None else max_iter
        self._store: dict[tuple[bytes, bytes, int], tuple[np.ndarray, float]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._store)

    @staticmethod
    def key(params: PayoffParams, periods: int) -> tuple[bytes, bytes, int]:
        return (*params.cache_key(), periods)

    def __contains__(self, key) -> bool:
        return key in self._store

    def put(self, key, value: tuple[np.ndarray, float]) -> None:
        with self._lock:
            self._store[key] = value

    def get(self, params: PayoffParams, periods: int) -> tuple[np.ndarray, float]:
        key = self.key(params, periods)
        hit = self._store.get(key)
        if hit is None:
            hit = solve_ccp_stack(self.spec, params, self.kernel, periods, tol=self.tol, max_iter=self.max_iter)
            self.put(key, hit)
        return hit
