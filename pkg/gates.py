"""
DDCSieve Gates - Model invariants.

G1: DiscountContraction - 0 <= rho < 1
G2: ActionSet - at least the outside good and one inside action
G3: CoefficientLayout - beta blocks split evenly over inside actions and fit in x
G4: DistinctStates - grid points distinct, dimension matches the model
G5: KernelShape - probs indexed [action][from][to] over the grid
G6: RowStochastic - every kernel row sums to 1 (1e-12)
G7: NonNegative - every kernel entry >= 0
G8: ParamDimensions - gamma / beta lengths match the payoff layout
G9: MixtureWeights - mixture weights on the simplex (1e-12)
G10: TruncationBounds - truncated normals with lo < hi and sigma > 0
G11: PanelShape - rectangular panel, actions and states in range
"""

from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np

from ddcsieve.domain.model import ModelSpec, PayoffParams, StateGrid, TransitionKernel
from ddcsieve.domain.panel import MixtureSpec, Panel, TruncatedNormal

ROW_SUM_TOL = 1e-12


class GateError(Exception):
    """Gate validation error."""

    def __init__(self, gate_name: str, message: str, details: dict | None = None):
        self.gate_name = gate_name
        self.message = message
        self.details = details or {}
        super().__init__(f"[{gate_name}] {message}")


@dataclass
class GateResult:
    """Result of a gate check."""

    passed: bool
    gate_name: str
    message: str = ""


@dataclass(frozen=True)
class Violation:
    """One failing invariant, e.g. RowSum{action=0, from=3}."""

    kind: str
    gate_name: str
    details: dict = field(default_factory=dict)

    def __str__(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.details.items())
        return f"{self.kind}{{{inner}}}"

    def as_dict(self) -> dict:
        return {"kind": self.kind, "gate": self.gate_name, **self.details}


def _raise_first(gate_name: str, message: str, found: list[Violation]) -> GateResult:
    if found:
        raise GateError(gate_name, message, {"violations": [v.as_dict() for v in found]})
    return GateResult(True, gate_name)


# =============================================================================
# Gates
# =============================================================================


class Gates:
    """DDCSieve validation gates."""

    # =========================================================================
    # G1: Discount Contraction
    # =========================================================================

    @classmethod
    def _discount(cls, spec: ModelSpec) -> Iterator[Violation]:
        if not (0.0 <= spec.discount < 1.0):
            yield Violation("Discount", "G1_DiscountContraction", {"rho": spec.discount})

    @classmethod
    def discount_contraction(cls, spec: ModelSpec) -> GateResult:
        """
        G1: rho in [0, 1), so the Bellman operator is a contraction.

        Raises:
            GateError: If rho is outside [0, 1)
        """
        return _raise_first("G1_DiscountContraction", "Discount must lie in [0, 1).", list(cls._discount(spec)))

    @classmethod
    def check_discount_contraction(cls, spec: ModelSpec) -> bool:
        """Check without raising (returns bool)."""
        return not list(cls._discount(spec))

    # =========================================================================
    # G2: Action Set
    # =========================================================================

    @classmethod
    def _action_set(cls, spec: ModelSpec) -> Iterator[Violation]:
        if spec.num_actions < 2:
            yield Violation("ActionCount", "G2_ActionSet", {"num_actions": spec.num_actions})

    @classmethod
    def action_set(cls, spec: ModelSpec) -> GateResult:
        """G2: num_actions >= 2 (outside good plus at least one inside action)."""
        return _raise_first("G2_ActionSet", "At least two actions are required.", list(cls._action_set(spec)))

    # =========================================================================
    # G3: Coefficient Layout
    # =========================================================================

    @classmethod
    def _layout(cls, spec: ModelSpec) -> Iterator[Violation]:
        if spec.random_coef_count < 1 or not spec.layout_consistent:
            yield Violation(
                "CoefficientLayout",
                "G3_CoefficientLayout",
                {
                    "random_coef_count": spec.random_coef_count,
                    "inside_actions": spec.inside_actions,
                    "intercept_mode": spec.intercept_mode,
                    "state_dim": spec.state_dim,
                },
            )

    @classmethod
    def coefficient_layout(cls, spec: ModelSpec) -> GateResult:
        """
        G3: b = p|A| (slopes only) or b = (1 + p)|A| (with intercepts), 0 <= p <= k.

        Raises:
            GateError: If beta cannot be split evenly over inside actions
        """
        return _raise_first("G3_CoefficientLayout", "Inconsistent random coefficient layout.", list(cls._layout(spec)))

    # =========================================================================
    # G4: Distinct States
    # =========================================================================

    @classmethod
    def _distinct_states(cls, spec: ModelSpec, grid: StateGrid) -> Iterator[Violation]:
        if grid.dim != spec.state_dim:
            yield Violation("GridDimension", "G4_DistinctStates", {"grid_dim": grid.dim, "state_dim": spec.state_dim})
        if grid.size < 2:
            yield Violation("GridSize", "G4_DistinctStates", {"size": grid.size})
        seen: dict[tuple, int] = {}
        for j, point in enumerate(grid.points.tolist()):
            key = tuple(point)
            if key in seen:
                yield Violation("DuplicateState", "G4_DistinctStates", {"i": seen[key], "j": j})
            else:
                seen[key] = j

    @classmethod
    def distinct_states(cls, spec: ModelSpec, grid: StateGrid) -> GateResult:
        """G4: Grid points are distinct vectors of the model's state dimension."""
        return _raise_first("G4_DistinctStates", "Grid points must be distinct.", list(cls._distinct_states(spec, grid)))

    # =========================================================================
    # G5-G7: Transition kernel
    # =========================================================================

    @classmethod
    def _kernel_shape(cls, spec: ModelSpec, grid: StateGrid, kernel: TransitionKernel) -> Iterator[Violation]:
        expected = (spec.num_actions, grid.size, grid.size)
        if kernel.probs.shape != expected:
            yield Violation("KernelShape", "G5_KernelShape", {"shape": kernel.probs.shape, "expected": expected})

    @classmethod
    def _row_stochastic(cls, kernel: TransitionKernel) -> Iterator[Violation]:
        sums = kernel.probs.sum(axis=2)
        for a, s in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL), strict=True):
            yield Violation("RowSum", "G6_RowStochastic", {"action": int(a), "from": int(s), "sum": float(sums[a, s])})

    @classmethod
    def _non_negative(cls, kernel: TransitionKernel) -> Iterator[Violation]:
        for a, s, t in zip(*np.nonzero(kernel.probs < 0.0), strict=True):
            yield Violation("NegativeProb", "G7_NonNegative", {"action": int(a), "from": int(s), "to": int(t)})

    @classmethod
    def row_stochastic(cls, kernel: TransitionKernel) -> GateResult:
        """
        G6/G7: Kernel rows are probability vectors.

        Raises:
            GateError: Listing every failing (action, from) row
        """
        found = list(cls._row_stochastic(kernel)) + list(cls._non_negative(kernel))
        return _raise_first("G6_RowStochastic", "Kernel rows must be probability vectors.", found)

    @classmethod
    def check_row_stochastic(cls, kernel: TransitionKernel) -> bool:
        """Check without raising (returns bool)."""
        try:
            cls.row_stochastic(kernel)
            return True
        except GateError:
            return False

    # =========================================================================
    # G8: Param Dimensions
    # =========================================================================

    @classmethod
    def _param_dimensions(cls, spec: ModelSpec, params: PayoffParams) -> Iterator[Violation]:
        if params.gamma.size != spec.gamma_size:
            yield Violation("GammaLength", "G8_ParamDimensions", {"got": params.gamma.size, "expected": spec.gamma_size})
        if params.beta.size != spec.random_coef_count:
            yield Violation(
                "BetaLength", "G8_ParamDimensions", {"got": params.beta.size, "expected": spec.random_coef_count}
            )

    @classmethod
    def param_dimensions(cls, spec: ModelSpec, params: PayoffParams) -> GateResult:
        """G8: gamma and beta lengths match the payoff layout."""
        return _raise_first(
            "G8_ParamDimensions", "Payoff parameters do not match the layout.", list(cls._param_dimensions(spec, params))
        )

    # =========================================================================
    # G9-G10: Mixture
    # =========================================================================

    @classmethod
    def _mixture(cls, mixture: MixtureSpec) -> Iterator[Violation]:
        weights = mixture.weights
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > ROW_SUM_TOL:
            yield Violation("MixtureWeights", "G9_MixtureWeights", {"sum": float(weights.sum())})
        for c, comp in enumerate(mixture.components):
            fam = comp.family
            if fam.dim != mixture.dim:
                yield Violation("MixtureDimension", "G9_MixtureWeights", {"component": c})
            if isinstance(fam, TruncatedNormal):
                if any(lo >= hi for lo, hi in zip(fam.lo, fam.hi, strict=True)):
                    yield Violation("TruncationBounds", "G10_TruncationBounds", {"component": c})
                if any(s <= 0 for s in fam.sigma):
                    yield Violation("TruncationScale", "G10_TruncationBounds", {"component": c})

    @classmethod
    def mixture(cls, mixture: MixtureSpec) -> GateResult:
        """G9/G10: Valid mixture specification."""
        return _raise_first("G9_MixtureWeights", "Invalid mixture specification.", list(cls._mixture(mixture)))

    # =========================================================================
    # G11: Panel Shape
    # =========================================================================

    @classmethod
    def _panel(cls, panel: Panel) -> Iterator[Violation]:
        if panel.states.shape != panel.actions.shape or panel.states.ndim != 2:
            yield Violation("PanelShape", "G11_PanelShape", {"states": panel.states.shape, "actions": panel.actions.shape})
            return
        if panel.actions.size and (panel.actions.min() < 0 or panel.actions.max() >= panel.num_actions):
            yield Violation("ActionRange", "G11_PanelShape", {"num_actions": panel.num_actions})
        if panel.states.size and (panel.states.min() < 0 or panel.states.max() >= panel.grid.size):
            yield Violation("StateRange", "G11_PanelShape", {"num_states": panel.grid.size})

    @classmethod
    def panel_shape(cls, panel: Panel) -> GateResult:
        """G11: Rectangular panel with in-range actions and grid states."""
        return _raise_first("G11_PanelShape", "Invalid panel.", list(cls._panel(panel)))

    # =========================================================================
    # Aggregate
    # =========================================================================

    @classmethod
    def model_violations(cls, spec: ModelSpec, grid: StateGrid, kernel: TransitionKernel) -> list[Violation]:
        """All model-core violations (empty list iff every invariant holds)."""
        found = [
            *cls._discount(spec),
            *cls._action_set(spec),
            *cls._layout(spec),
            *cls._distinct_states(spec, grid),
            *cls._kernel_shape(spec, grid, kernel),
        ]
        if kernel.probs.ndim == 3:
            found += [*cls._row_stochastic(kernel), *cls._non_negative(kernel)]
        return found
