"""Matrices for the rank estimator and the identification lab."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddcsieve.domain.model import _frozen_array


@dataclass(frozen=True)
class RankConditioning:
    """Fixed (a1, a2, a3, x1) of the ratio operator; x1 is a grid index."""

    a1: int
    a2: int
    a3: int
    x1: int


@dataclass(frozen=True, eq=False)
class RatioMatrix:
    """M[x3, x2] = f(a3, a2, a1, x3, x2 | x1) / (F(x3; x2, a2) F(x2; x1, a1))."""

    values: np.ndarray
    x3_states: tuple[int, ...]
    x2_states: tuple[int, ...]
    conditioning: RankConditioning
    mode: str

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))


@dataclass(frozen=True)
class LabConditioning:
    """Fixed (a1, a4, x1, x4) of the identification operators; a2 is the outside good."""

    a1: int
    a4: int
    x1: int
    x4: int


@dataclass(frozen=True, eq=False)
class OperatorBundle:
    """
    Discretized operators of the eigendecomposition argument.

    Rows of L_342, L_32 and L_3b are (a3, x3) pairs, a3-major.
    """

    L_342: np.ndarray
    L_32: np.ndarray
    L_3b: np.ndarray
    D4: np.ndarray
    Db: np.ndarray
    L_b2: np.ndarray
    first_marginal: np.ndarray
    x2_states: tuple[int, ...]
    x3_states: tuple[int, ...]
    num_actions: int
    conditioning: LabConditioning
    betas: np.ndarray
    weights: np.ndarray
    residual_342: float
    residual_32: float
    stationary: bool = True

    def __post_init__(self):
        for name in ("L_342", "L_32", "L_3b", "D4", "Db", "L_b2", "first_marginal", "betas", "weights"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))

    @property
    def num_types(self) -> int:
        return self.L_3b.shape[1]


@dataclass(frozen=True)
class InjectivityReport:
    min_sv_L3b: float
    min_sv_Lb2_adjoint: float
    tolerance: float

    @property
    def injective(self) -> bool:
        return self.min_sv_L3b > self.tolerance and self.min_sv_Lb2_adjoint > self.tolerance


@dataclass(frozen=True, eq=False)
class SpectralRecovery:
    """
    Eigenpairs of L_342 pinv(L_32) matched to the true types.

    eigenvalues[r] and ccps[:, r] (rows (a3, x3)) belong to true type
    `matching[r]`.
    """

    eigenvalues: np.ndarray
    ccps: np.ndarray
    matching: tuple[int, ...]
    eigenvalue_gap: float
    eigenvalue_error: float
    ccp_error: float
    normalization_error: float

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen_array(self.eigenvalues))
        object.__setattr__(self, "ccps", _frozen_array(self.ccps))


@dataclass(frozen=True, eq=False)
class WeightRecovery:
    weights: np.ndarray
    weight_error: float

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen_array(self.weights))
