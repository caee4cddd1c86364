"""
DDCSieve domain types.

All types are frozen dataclasses; numpy fields are read-only copies.
"""

from ddcsieve.domain.model import Horizon, ModelSpec, PayoffParams, StateGrid, TransitionKernel
from ddcsieve.domain.montecarlo import (
    CdfBands,
    DgpSpec,
    GammaStats,
    McConfig,
    McSummary,
    ReplicationRecord,
    SampleSizeSummary,
)
from ddcsieve.domain.operators import (
    InjectivityReport,
    LabConditioning,
    OperatorBundle,
    RankConditioning,
    RatioMatrix,
    SpectralRecovery,
    WeightRecovery,
)
from ddcsieve.domain.panel import MixtureComponent, MixtureSpec, Panel, PointMass, TruncatedNormal, baseline_mixture
from ddcsieve.domain.sieve import (
    EstimateDiagnostics,
    EstimateResult,
    EstimatorConfig,
    GridConfig,
    SearchConfig,
    SearchRecord,
    SieveDistribution,
    StepCdf,
    TransitionEstimate,
    X1Partition,
)
from ddcsieve.domain.solution import CcpTable, ValueFunction

__all__ = [
    "CcpTable",
    "CdfBands",
    "DgpSpec",
    "EstimateDiagnostics",
    "EstimateResult",
    "EstimatorConfig",
    "GammaStats",
    "GridConfig",
    "Horizon",
    "InjectivityReport",
    "LabConditioning",
    "McConfig",
    "McSummary",
    "MixtureComponent",
    "MixtureSpec",
    "ModelSpec",
    "OperatorBundle",
    "Panel",
    "PayoffParams",
    "PointMass",
    "RankConditioning",
    "RatioMatrix",
    "ReplicationRecord",
    "SampleSizeSummary",
    "SearchConfig",
    "SearchRecord",
    "SieveDistribution",
    "SpectralRecovery",
    "StateGrid",
    "StepCdf",
    "TransitionEstimate",
    "TransitionKernel",
    "TruncatedNormal",
    "ValueFunction",
    "WeightRecovery",
    "X1Partition",
    "baseline_mixture",
]
