"""Tests for the model core: payoffs, grids, kernels and validation."""

import numpy as np
import pytest

from ddcsieve.domain import ModelSpec, PayoffParams, StateGrid, TransitionKernel
from ddcsieve.exceptions import DDCError
from ddcsieve.gates import Gates
from ddcsieve.services import model as model_service


class TestPeriodPayoff:
    """Tests for period_payoff and payoff_matrix."""

    def test_outside_good_is_zero(self, spec, params):
        """Action 0 pays exactly zero."""
        assert model_service.period_payoff(spec, params, [1.5, -1.0], 0) == 0.0

    def test_inside_action_is_linear(self, spec):
        """u(x, 1) = beta x1 + gamma x2."""
        params = PayoffParams([0.5], [2.0])
        assert model_service.period_payoff(spec, params, [1.5, -1.0], 1) == pytest.approx(2.0 * 1.5 - 0.5)

    def test_intercept_mode(self):
        """A random intercept is added before the slopes."""
        spec = ModelSpec(num_actions=2, state_dim=1, discount=0.9, random_coef_count=2, intercept_mode=True)
        params = PayoffParams(np.zeros(0), [1.0, 3.0])
        assert model_service.period_payoff(spec, params, [2.0], 1) == pytest.approx(7.0)

    def test_state_length_mismatch(self, spec, params):
        """A state vector of the wrong length is rejected."""
        with pytest.raises(DDCError) as exc:
            model_service.period_payoff(spec, params, [1.0, 2.0, 3.0], 1)
        assert exc.value.code == "DIMENSION_MISMATCH"

    def test_param_length_mismatch(self, spec):
        """gamma of the wrong length is rejected."""
        with pytest.raises(DDCError) as exc:
            model_service.period_payoff(spec, PayoffParams([0.5, 0.1], [1.0]), [1.0, 2.0], 1)
        assert exc.value.code == "DIMENSION_MISMATCH"

    def test_payoff_matrix_matches_pointwise(self, spec, params, grid):
        """Every entry equals period_payoff; column 0 is zero."""
        u = model_service.payoff_matrix(spec, params, grid)
        assert u.shape == (grid.size, 2)
        assert np.all(u[:, 0] == 0.0)
        for s, x in enumerate(grid.points):
            assert u[s, 1] == pytest.approx(model_service.period_payoff(spec, params, x, 1))


class TestGrids:
    """Tests for product_grid and project_state."""

    def test_product_grid_order(self):
        """Last axis varies fastest."""
        grid = model_service.product_grid([[0.0, 1.0], [0.0, 1.0, 2.0]])
        assert grid.size == 6
        np.testing.assert_array_equal(grid.points[1], [0.0, 1.0])
        np.testing.assert_array_equal(grid.points[3], [1.0, 0.0])

    def test_index_of(self, grid):
        """Exact lookup of a grid point."""
        assert grid.index_of([2.0, 1.0]) == grid.size - 1
        assert grid.index_of([2.5, 1.0]) is None

    def test_project_state(self, grid):
        """Off-grid states go to the nearest point."""
        assert model_service.project_state(grid, [1.9, 0.8]) == grid.index_of([2.0, 1.0])

    def test_one_dimensional_grid(self):
        """A flat list becomes a column of scalar states."""
        grid = StateGrid([0.0, 1.0, 2.0])
        assert grid.dim == 1
        assert grid.size == 3


class TestAr1Kernel:
    """Tests for the discretized AR(1) kernel."""

    def test_rows_are_probability_vectors(self, kernel):
        """Every row sums to one and is non-negative."""
        assert Gates.check_row_stochastic(kernel)
        assert kernel.probs.shape == (2, 15, 15)

    def test_drift_depends_on_action(self, kernel, grid):
        """Action 1 lowers the expected x2."""
        mean_x2 = kernel.probs @ grid.points[:, 1]
        assert np.all(mean_x2[1] < mean_x2[0])

    def test_probs_are_read_only(self, kernel):
        """Kernels are immutable."""
        with pytest.raises(ValueError):
            kernel.probs[0, 0, 0] = 1.0


class TestValidate:
    """Tests for model validation."""

    def test_valid_model(self, spec, grid, kernel):
        """A well-formed model has no violations."""
        assert model_service.validate(spec, grid, kernel) == []

    def test_row_sum_violation(self, spec, grid, kernel):
        """A row summing to 0.9 is reported with its action and state."""
        probs = np.array(kernel.probs)
        probs[1, 3] *= 0.9
        found = model_service.validate(spec, grid, TransitionKernel(probs, grid))
        assert [v.kind for v in found] == ["RowSum"]
        assert found[0].details["action"] == 1
        assert found[0].details["from"] == 3
        assert str(found[0]).startswith("RowSum{action=1,from=3")

    def test_duplicate_state(self, spec):
        """Duplicate grid points are reported."""
        grid = StateGrid([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        probs = np.full((2, 3, 3), 1.0 / 3.0)
        found = model_service.validate(spec, grid, TransitionKernel(probs, grid))
        assert any(v.kind == "DuplicateState" and v.details == {"i": 0, "j": 2} for v in found)

    def test_discount_out_of_range(self, grid, kernel):
        """rho = 1 is not a contraction."""
        spec = ModelSpec(num_actions=2, state_dim=2, discount=1.0, random_coef_count=1)
        assert [v.kind for v in model_service.validate(spec, grid, kernel)] == ["Discount"]

    def test_kernel_shape(self, spec, grid):
        """A kernel with the wrong number of actions is reported."""
        probs = np.full((3, grid.size, grid.size), 1.0 / grid.size)
        found = model_service.validate(spec, grid, TransitionKernel(probs, grid))
        assert any(v.kind == "KernelShape" for v in found)
