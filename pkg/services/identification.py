"""Identification lab - operator factorization and spectral recovery for discrete types.

With the outside good in period 2 (a2 = 0) and conditioning (a1, a4, x1, x4):

    L_342 = L_3b D4 Db L_b2        L_32 = L_3b Db L_b2

    L_3b[(a3, x3), r] = P(a3; x3, b_r)       D4 = diag P(a4; x4, b_r)
    L_b2[r, x2]       = P(0; x2, b_r)        Db = diag P(a1; x1, b_r) w_r

so L_342 pinv(L_32) = L_3b D4 pinv(L_3b): eigenvalues are the D4 entries and
eigenvectors are the columns of L_3b up to scale. L_342 and L_32 are built
from the joint history probabilities divided by the transition factors, so
the factorization check is a genuine cross-check of two computations.
"""

import logging

import numpy as np
from scipy import linalg, optimize

from ddcsieve.conf import ddcsieve_settings
from ddcsieve.domain.model import ModelSpec, TransitionKernel
from ddcsieve.domain.operators import (
    InjectivityReport,
    LabConditioning,
    OperatorBundle,
    SpectralRecovery,
    WeightRecovery,
)
from ddcsieve.exceptions import DDCError
from ddcsieve.services.population import first_marginal, population_joint, type_stacks
from ddcsieve.services.solver import SolutionCache

logger = logging.getLogger(__name__)

OUTSIDE = 0


def _retained_states(kernel: TransitionKernel, c: LabConditioning, x2_states, x3_states, floor: float):
    S = kernel.num_states
    x2 = np.arange(S) if x2_states is None else np.asarray(x2_states, dtype=np.int64)
    x3 = np.arange(S) if x3_states is None else np.asarray(x3_states, dtype=np.int64)
    x2 = x2[kernel.probs[c.a1, c.x1, x2] > floor]
    into_x3 = kernel.probs[OUTSIDE][np.ix_(x2, x3)] > floor
    into_x4 = kernel.probs[:, x3, c.x4] > floor
    x3 = x3[into_x3.all(axis=0) & into_x4.all(axis=0)]
    if x2.size == 0 or x3.size == 0:
        raise DDCError("EMPTY_MATRIX", conditioning=str(c), floor=floor)
    return x2, x3


def _history_operator(joint: np.ndarray, kernel: TransitionKernel, c: LabConditioning, x2, x3, with_tail: bool):
    """Rows (a3, x3) a3-major, columns x2: joint / transition factors."""
    F = kernel.probs
    rows = []
    for a3 in range(F.shape[0]):
        cell = joint[c.a1, x2, OUTSIDE][:, x3, a3].T
        denom = F[OUTSIDE][np.ix_(x2, x3)].T * F[c.a1, c.x1, x2][None, :]
        if with_tail:
            denom = denom * F[a3, x3, c.x4][:, None]
        rows.append(cell / denom)
    return np.vstack(rows)


def build_operators(
    spec: ModelSpec,
    gamma,
    kernel: TransitionKernel,
    betas,
    weights,
    conditioning: LabConditioning,
    x2_states=None,
    x3_states=None,
    tol: float | None = None,
    cache: SolutionCache | None = None,
) -> OperatorBundle:
    """
    Every lab matrix for a discrete type distribution, from exact solver CCPs.

    Raises:
        DDCError: FACTORIZATION_RESIDUAL if either factorization misses tol
    """
    tol = ddcsieve_settings.FACTORIZATION_TOL if tol is None else tol
    c = conditioning
    betas = np.asarray(betas, dtype=float).reshape(len(betas), -1)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (betas.shape[0],):
        raise DDCError("DIMENSION_MISMATCH", "One weight per type", types=betas.shape[0], weights=weights.size)
    if np.any(weights <= 0):
        raise DDCError("CONFIG_INVALID", "Type weights must be strictly positive", weights=weights.tolist())

    stacks = type_stacks(spec, gamma, kernel, betas, 4, cache=cache)
    x2, x3 = _retained_states(kernel, c, x2_states, x3_states, ddcsieve_settings.RATIO_FLOOR)
    A = kernel.num_actions

    L_3b = np.vstack([np.column_stack([s[2, x3, a3] for s in stacks]) for a3 in range(A)])
    D4 = np.diag([s[3, c.x4, c.a4] for s in stacks])
    Db = np.diag([w * s[0, c.x1, c.a1] for w, s in zip(weights, stacks, strict=True)])
    L_b2 = np.vstack([s[1, x2, OUTSIDE] for s in stacks])

    L_32 = _history_operator(population_joint(stacks, weights, kernel, c.x1), kernel, c, x2, x3, False)
    L_342 = _history_operator(
        population_joint(stacks, weights, kernel, c.x1, tail=(c.a4, c.x4)), kernel, c, x2, x3, True
    )
    residual_342 = float(np.max(np.abs(L_342 - L_3b @ D4 @ Db @ L_b2)))
    residual_32 = float(np.max(np.abs(L_32 - L_3b @ Db @ L_b2)))
    logger.debug("build_operators: residuals %.3e / %.3e", residual_342, residual_32)
    if max(residual_342, residual_32) > tol:
        raise DDCError("FACTORIZATION_RESIDUAL", residual_342=residual_342, residual_32=residual_32, tol=tol)

    return OperatorBundle(
        L_342=L_342,
        L_32=L_32,
        L_3b=L_3b,
        D4=D4,
        Db=Db,
        L_b2=L_b2,
        first_marginal=first_marginal(stacks, weights, kernel, c.x1, c.a1)[x2],
        x2_states=tuple(map(int, x2)),
        x3_states=tuple(map(int, x3)),
        num_actions=A,
        conditioning=c,
        betas=betas,
        weights=weights,
        residual_342=residual_342,
        residual_32=residual_32,
        stationary=spec.horizon.is_infinite,
    )


def injectivity_diagnostic(bundle: OperatorBundle, tol: float | None = None) -> InjectivityReport:
    """Smallest singular values of L_3b and of the adjoint of L_b2."""
    tol = ddcsieve_settings.INJECTIVITY_TOL if tol is None else tol
    return InjectivityReport(
        min_sv_L3b=float(linalg.svdvals(bundle.L_3b).min()),
        min_sv_Lb2_adjoint=float(linalg.svdvals(bundle.L_b2.T).min()),
        tolerance=tol,
    )


def spectral_recover(
    bundle: OperatorBundle,
    rcond: float | None = None,
    gap_tol: float | None = None,
) -> SpectralRecovery:
    """
    Eigendecomposition of L_342 pinv(L_32), matched to the true types.

    Keeps the num_types eigenvalues of largest modulus; every eigenvector is
    rescaled so its probabilities over a3 sum to one (averaged over x3).
    Matching minimizes total eigenvalue distance to the true D4 entries.

    Raises:
        DDCError: NOT_INJECTIVE if L_3b or the L_b2 adjoint is rank deficient,
            EIGENVALUE_COLLISION if two recovered eigenvalues (or one and the
            null spectrum) are closer than gap_tol
    """
    rcond = ddcsieve_settings.PINV_RCOND if rcond is None else rcond
    gap_tol = ddcsieve_settings.EIGEN_GAP_TOL if gap_tol is None else gap_tol
    report = injectivity_diagnostic(bundle)
    if not report.injective:
        raise DDCError(
            "NOT_INJECTIVE",
            min_sv_L3b=report.min_sv_L3b,
            min_sv_Lb2_adjoint=report.min_sv_Lb2_adjoint,
        )

    R = bundle.num_types
    A = bundle.L_342 @ np.linalg.pinv(bundle.L_32, rcond=rcond)
    eigvals, eigvecs = linalg.eig(A)
    top = np.argsort(-np.abs(eigvals), kind="stable")[:R]
    lam = eigvals[top].real
    vecs = eigvecs[:, top]

    spectrum = np.concatenate([lam, [0.0]])
    gap = float(np.min(np.abs(spectrum[:, None] - spectrum[None, :])[np.triu_indices(R + 1, k=1)]))
    if gap < gap_tol:
        raise DDCError("EIGENVALUE_COLLISION", gap=gap, tol=gap_tol)

    n3 = len(bundle.x3_states)
    per_x3 = vecs.reshape(bundle.num_actions, n3, R).sum(axis=0)
    ccps = (vecs / per_x3.mean(axis=0)).real
    normalization_error = float(np.max(np.abs(ccps.reshape(bundle.num_actions, n3, R).sum(axis=0) - 1.0)))

    truth = np.diag(bundle.D4)
    rows, cols = optimize.linear_sum_assignment(np.abs(lam[:, None] - truth[None, :]))
    matching = tuple(int(cols[np.flatnonzero(rows == r)[0]]) for r in range(R))
    eigenvalue_error = float(np.max(np.abs(lam - truth[list(matching)])))
    ccp_error = float(np.max(np.abs(ccps - bundle.L_3b[:, list(matching)])))
    logger.info(
        "spectral_recover: %d types, gap=%.3e, eigenvalue error=%.3e, ccp error=%.3e",
        R,
        gap,
        eigenvalue_error,
        ccp_error,
    )
    return SpectralRecovery(
        eigenvalues=lam,
        ccps=ccps,
        matching=matching,
        eigenvalue_gap=gap,
        eigenvalue_error=eigenvalue_error,
        ccp_error=ccp_error,
        normalization_error=normalization_error,
    )


def recover_type_weights(bundle: OperatorBundle, recovery: SpectralRecovery) -> WeightRecovery:
    """
    Type weights from the recovered CCPs and the first-two-period marginal.

        f(a1, x2, 0 | x1) / F(x2; x1, a1) = sum_r w_r P(a1; x1, b_r) P(0; x2, b_r)

    The recovered columns supply P(0; x2, .) and P(a1; x1, .), which needs a
    stationary model with x1 and every x2 among the recovered x3 states.

    Raises:
        DDCError: UNSUPPORTED_HORIZON for a finite horizon, CONFIG_INVALID
            when the states are not covered
    """
    if not bundle.stationary:
        raise DDCError("UNSUPPORTED_HORIZON", "Weight recovery needs stationary CCPs")
    c = bundle.conditioning
    row_of = {x: i for i, x in enumerate(bundle.x3_states)}
    missing = [x for x in (c.x1, *bundle.x2_states) if x not in row_of]
    if missing:
        raise DDCError("CONFIG_INVALID", "State not among the recovered x3 states", state=missing[0])

    n3 = len(bundle.x3_states)
    ccps = recovery.ccps
    p_outside = ccps[[OUTSIDE * n3 + row_of[x] for x in bundle.x2_states]]
    p_first = ccps[c.a1 * n3 + row_of[c.x1]]
    scaled, *_ = np.linalg.lstsq(p_outside, bundle.first_marginal, rcond=None)
    weights = scaled / p_first
    weight_error = float(np.max(np.abs(weights - bundle.weights[list(recovery.matching)])))
    logger.info("recover_type_weights: weights=%s error=%.3e", weights.tolist(), weight_error)
    return WeightRecovery(weights=weights, weight_error=weight_error)
