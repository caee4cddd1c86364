"""Fixed-grid sieve distribution and estimation results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ddcsieve.domain.model import TransitionKernel, _frozen_array
from ddcsieve.exceptions import DDCError


@dataclass(frozen=True, eq=False)
class TransitionEstimate:
    """First-step estimate of F_x."""

    kernel: TransitionKernel
    cell_counts: np.ndarray
    method: str
    bandwidths: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    empty_cells: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cell_counts", _frozen_array(self.cell_counts, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class X1Partition:
    """Partition of the initial-state support into cells of grid states."""

    cells: tuple[tuple[int, ...], ...]

    @classmethod
    def single(cls, num_states: int) -> X1Partition:
        return cls((tuple(range(num_states)),))

    @property
    def size(self) -> int:
        return len(self.cells)

    def assign(self, initial_states: np.ndarray) -> np.ndarray:
        """Cell index of every individual; states outside all cells raise."""
        lookup = {s: k for k, cell in enumerate(self.cells) for s in cell}
        try:
            return np.array([lookup[int(s)] for s in initial_states], dtype=np.int64)
        except KeyError as exc:
            raise DDCError("CONFIG_INVALID", "Initial state not covered by x1 cells", state=int(exc.args[0])) from None


@dataclass(frozen=True, eq=False)
class SieveDistribution:
    """
    Fixed-grid sieve f(b, x1) = sum_j sum_k P[j, k] 1(b_j <= b) 1(x1 in cell k).

    grid has shape (B, d); weights (B, X) with columns on the simplex;
    cell_mass is the share of individuals per x1 cell.
    """

    grid: np.ndarray
    weights: np.ndarray
    partition: X1Partition
    cell_mass: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim == 1:
            grid = grid[:, None]
        object.__setattr__(self, "grid", _frozen_array(grid))
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        object.__setattr__(self, "cell_mass", _frozen_array(self.cell_mass))

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    def marginal_weights(self) -> np.ndarray:
        """P_j integrated over x1 cells."""
        return self.weights @ self.cell_mass


@dataclass(frozen=True, eq=False)
class StepCdf:
    """Right-continuous step CDF jumping by `jumps` at sorted `points`."""

    points: np.ndarray
    jumps: np.ndarray

    def __post_init__(self):
        order = np.argsort(np.asarray(self.points, dtype=float), kind="stable")
        object.__setattr__(self, "points", _frozen_array(np.asarray(self.points, dtype=float)[order]))
        object.__setattr__(self, "jumps", _frozen_array(np.asarray(self.jumps, dtype=float)[order]))

    def __call__(self, b) -> np.ndarray:
        cum = np.concatenate([[0.0], np.cumsum(self.jumps)])
        return cum[np.searchsorted(self.points, np.asarray(b, dtype=float), side="right")]

    @property
    def breakpoints(self) -> np.ndarray:
        return self.points[self.jumps > 0]

    @property
    def support(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])


@dataclass(frozen=True)
class SearchRecord:
    gamma: tuple[float, ...]
    loglik: float


@dataclass(frozen=True)
class EstimateDiagnostics:
    search_evaluations: int
    search_converged: bool
    inner_iterations: int
    max_solver_residual: float
    elapsed_seconds: float
    trace: tuple[SearchRecord, ...] = ()
    empty_transition_cells: int = 0


@dataclass(frozen=True, eq=False)
class EstimateResult:
    """Second-step estimate (gamma_hat, f_hat) with search diagnostics."""

    gamma_hat: np.ndarray
    sieve: SieveDistribution
    loglik: float
    active_types: int
    diagnostics: EstimateDiagnostics = field(
        default_factory=lambda: EstimateDiagnostics(0, True, 0, 0.0, 0.0)
    )

    def __post_init__(self):
        object.__setattr__(self, "gamma_hat", _frozen_array(np.atleast_1d(self.gamma_hat)))


@dataclass(frozen=True)
class GridConfig:
    """Sieve grid: beta support box, B(n) override (None = grid_rule) and x1 cells."""

    beta_support: tuple[tuple[float, float], ...] = ((0.0, 6.0),)
    size: int | None = None
    x1_cells: tuple[tuple[int, ...], ...] | None = None


@dataclass(frozen=True)
class SearchConfig:
    """Derivative-free profile search over gamma inside a box."""

    gamma_box: tuple[tuple[float, float], ...] = ((-2.0, 3.0),)
    start: tuple[float, ...] | None = None
    max_evals: int | None = None
    xtol: float | None = None


@dataclass(frozen=True)
class EstimatorConfig:
    """Second-step tuning; None values fall back to settings."""

    grid: GridConfig = field(default_factory=GridConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    inner_tol: float | None = None
    inner_max_iter: int | None = None
    active_threshold: float | None = None
    transition_method: str | None = None
    bandwidths: tuple[tuple[float, ...], tuple[float, ...]] | None = None
