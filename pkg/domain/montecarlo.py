"""Monte Carlo harness configuration and summaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ddcsieve.domain.model import ModelSpec, TransitionKernel, _frozen_array
from ddcsieve.domain.panel import MixtureSpec
from ddcsieve.domain.sieve import EstimatorConfig


@dataclass(frozen=True, eq=False)
class DgpSpec:
    """Everything needed to draw one dataset."""

    model: ModelSpec
    mixture: MixtureSpec
    gamma: np.ndarray
    kernel: TransitionKernel
    periods: int
    init_dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma", _frozen_array(np.atleast_1d(self.gamma)))
        object.__setattr__(self, "init_dist", _frozen_array(self.init_dist))


@dataclass(frozen=True, eq=False)
class McConfig:
    sample_sizes: tuple[int, ...]
    replications: int
    dgp: DgpSpec
    seed: int
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    band_points: int = 121


@dataclass(frozen=True)
class ReplicationRecord:
    n: int
    replication: int
    gamma_hat: tuple[float, ...] = ()
    iae: float = float("nan")
    ise: float = float("nan")
    active_types: int = 0
    loglik: float = float("nan")
    seconds: float = 0.0
    error: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class GammaStats:
    bias: tuple[float, ...]
    variance: tuple[float, ...]
    mse: tuple[float, ...]
    scaled_bias: tuple[float, ...]
    scaled_variance: tuple[float, ...]
    scaled_mse: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class CdfBands:
    """Pointwise quantiles of the estimated CDFs across replications."""

    points: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    truth: np.ndarray


@dataclass(frozen=True, eq=False)
class SampleSizeSummary:
    n: int
    replications: int
    failures: int
    grid_points: int
    gamma: GammaStats
    mise: float
    iae_mean: float
    iae_min: float
    iae_max: float
    types_mean: float
    types_min: int
    types_max: int
    median_seconds: float
    bands: CdfBands | None = None


@dataclass(frozen=True, eq=False)
class McSummary:
    per_n: tuple[SampleSizeSummary, ...]
    records: tuple[ReplicationRecord, ...]
