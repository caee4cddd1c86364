"""Population quantities of a discrete type distribution.

Joint probabilities of short choice/state histories conditional on x1,
computed exactly from per-type CCP stacks and the transition kernel. Used
by the rank estimator (population mode) and the identification lab.
"""

import logging

import numpy as np

from ddcsieve.domain.model import ModelSpec, PayoffParams, TransitionKernel
from ddcsieve.exceptions import DDCError
from ddcsieve.services.solver import SolutionCache

logger = logging.getLogger(__name__)


def type_stacks(
    spec: ModelSpec,
    gamma,
    kernel: TransitionKernel,
    betas,
    periods: int,
    cache: SolutionCache | None = None,
) -> list[np.ndarray]:
    """CCP stack (periods, S, A) for every type in `betas`."""
    cache = cache or SolutionCache(spec, kernel)
    betas = np.asarray(betas, dtype=float).reshape(len(betas), -1)
    return [cache.get(PayoffParams(gamma, b), periods)[0] for b in betas]


def _check_types(stacks: list[np.ndarray], weights, periods: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(stacks),):
        raise DDCError("DIMENSION_MISMATCH", "One weight per type", types=len(stacks), weights=weights.size)
    short = [r for r, s in enumerate(stacks) if s.shape[0] < periods]
    if short:
        raise DDCError("DIMENSION_MISMATCH", "CCP stack shorter than the history", type=short[0], periods=periods)
    return weights


def population_joint(
    stacks: list[np.ndarray],
    weights,
    kernel: TransitionKernel,
    x1: int,
    tail: tuple[int, int] | None = None,
) -> np.ndarray:
    """
    J[a1, x2, a2, x3, a3] = f(a1, x2, a2, x3, a3 | x1) for a discrete type mix.

        sum_r w_r P_1(a1; x1, b_r) F(x2; x1, a1) P_2(a2; x2, b_r)
                  F(x3; x2, a2) P_3(a3; x3, b_r)

    With tail=(a4, x4) the fourth-period event is appended, giving
    f(a1, x2, a2, x3, a3, x4, a4 | x1) with the same index layout.
    """
    periods = 3 if tail is None else 4
    weights = _check_types(stacks, weights, periods)
    F = kernel.probs
    first = F[:, x1, :]
    second = F.transpose(1, 0, 2)
    joint = np.zeros((F.shape[0], F.shape[1], F.shape[0], F.shape[1], F.shape[0]))
    for w, stack in zip(weights, stacks, strict=True):
        term = np.einsum("a,ab,bc,bcd,de->abcde", stack[0, x1], first, stack[1], second, stack[2])
        if tail is not None:
            a4, x4 = tail
            term = term * (F[:, :, x4].T * stack[3, x4, a4])[None, None, None, :, :]
        joint += w * term
    return joint


def first_marginal(stacks: list[np.ndarray], weights, kernel: TransitionKernel, x1: int, a1: int, a2: int = 0):
    """f(a1, x2, a2 | x1) / F(x2; x1, a1) over x2, from the three-period joint."""
    joint = population_joint(stacks, weights, kernel, x1)
    mass = joint[a1, :, a2].sum(axis=(1, 2))
    denom = kernel.probs[a1, x1]
    return np.divide(mass, denom, out=np.zeros_like(mass), where=denom > 0)
