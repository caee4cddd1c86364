"""Tests for DDCSieve gates."""

import numpy as np
import pytest

from ddcsieve.domain import ModelSpec, Panel, PayoffParams, StateGrid, TransitionKernel
from ddcsieve.domain.panel import MixtureComponent, MixtureSpec, PointMass, TruncatedNormal, baseline_mixture
from ddcsieve.gates import GateError, Gates


class TestG1DiscountContraction:
    """G1: rho in [0, 1)."""

    @pytest.mark.parametrize("rho", [0.0, 0.5, 0.99])
    def test_valid_discount_passes(self, rho):
        """Discounts inside [0, 1) pass."""
        spec = ModelSpec(num_actions=2, state_dim=1, discount=rho, random_coef_count=1)
        assert Gates.discount_contraction(spec).passed

    @pytest.mark.parametrize("rho", [1.0, -0.1, 1.5])
    def test_invalid_discount_raises(self, rho):
        """Discounts outside [0, 1) raise."""
        spec = ModelSpec(num_actions=2, state_dim=1, discount=rho, random_coef_count=1)
        with pytest.raises(GateError) as exc:
            Gates.discount_contraction(spec)
        assert exc.value.gate_name == "G1_DiscountContraction"

    def test_check_variant_returns_bool(self):
        """check_discount_contraction does not raise."""
        spec = ModelSpec(num_actions=2, state_dim=1, discount=1.0, random_coef_count=1)
        assert Gates.check_discount_contraction(spec) is False


class TestG3CoefficientLayout:
    """G3: beta splits evenly over inside actions."""

    def test_even_split_passes(self):
        """b = 2 over two inside actions."""
        spec = ModelSpec(num_actions=3, state_dim=2, discount=0.9, random_coef_count=2)
        assert Gates.coefficient_layout(spec).passed

    def test_uneven_split_raises(self):
        """b = 3 cannot split over two inside actions."""
        spec = ModelSpec(num_actions=3, state_dim=2, discount=0.9, random_coef_count=3)
        with pytest.raises(GateError):
            Gates.coefficient_layout(spec)

    def test_too_many_slopes_raises(self):
        """More random slopes than state components."""
        spec = ModelSpec(num_actions=2, state_dim=1, discount=0.9, random_coef_count=2)
        with pytest.raises(GateError):
            Gates.coefficient_layout(spec)


class TestG6RowStochastic:
    """G6/G7: kernel rows are probability vectors."""

    def test_negative_entry_raises(self):
        """Negative probabilities are listed."""
        grid = StateGrid([0.0, 1.0])
        probs = np.array([[[1.2, -0.2], [0.5, 0.5]]])
        with pytest.raises(GateError) as exc:
            Gates.row_stochastic(TransitionKernel(probs, grid))
        kinds = [v["kind"] for v in exc.value.details["violations"]]
        assert kinds == ["NegativeProb"]

    def test_tolerance(self):
        """A row off by 1e-13 passes, 1e-11 does not."""
        grid = StateGrid([0.0, 1.0])
        assert Gates.check_row_stochastic(TransitionKernel(np.array([[[0.5, 0.5 + 1e-13]] * 2]), grid))
        assert not Gates.check_row_stochastic(TransitionKernel(np.array([[[0.5, 0.5 + 1e-11]] * 2]), grid))


class TestG8ParamDimensions:
    """G8: parameter lengths."""

    def test_matching_lengths_pass(self, spec):
        """gamma of length 1 and beta of length 1."""
        assert Gates.param_dimensions(spec, PayoffParams([0.5], [1.0])).passed

    def test_beta_length_raises(self, spec):
        """beta of length 2 for one random coefficient."""
        with pytest.raises(GateError) as exc:
            Gates.param_dimensions(spec, PayoffParams([0.5], [1.0, 2.0]))
        assert exc.value.details["violations"][0]["kind"] == "BetaLength"


class TestG9Mixture:
    """G9/G10: mixture specification."""

    def test_baseline_mixture_passes(self):
        """Three equal-weight truncated normals."""
        assert Gates.mixture(baseline_mixture()).passed

    def test_weights_must_sum_to_one(self):
        """Weights 0.5 + 0.4 fail."""
        mix = MixtureSpec((MixtureComponent(0.5, PointMass((1.0,))), MixtureComponent(0.4, PointMass((2.0,)))))
        with pytest.raises(GateError):
            Gates.mixture(mix)

    def test_truncation_bounds(self):
        """lo >= hi fails."""
        mix = MixtureSpec((MixtureComponent(1.0, TruncatedNormal((0.0,), (1.0,), (2.0,), (1.0,))),))
        with pytest.raises(GateError) as exc:
            Gates.mixture(mix)
        assert exc.value.details["violations"][0]["kind"] == "TruncationBounds"


class TestG11PanelShape:
    """G11: panel shape and ranges."""

    def test_action_out_of_range(self):
        """Action 2 in a two-action panel."""
        grid = StateGrid([0.0, 1.0])
        panel = Panel(np.zeros((2, 3)), np.array([[0, 1, 2], [0, 0, 0]]), grid, 2)
        with pytest.raises(GateError):
            Gates.panel_shape(panel)
