"""Tests for the identification lab."""

import numpy as np
import pytest

from ddcsieve.domain import Horizon, LabConditioning, ModelSpec
from ddcsieve.exceptions import DDCError
from ddcsieve.services import identification
from ddcsieve.tests.conftest import GAMMA, state_index

COND = LabConditioning(a1=1, a4=1, x1=state_index(0.0, 0.0), x4=state_index(2.0, 0.0))
BETAS = [[-1.5], [1.5]]
WEIGHTS = [0.4, 0.6]


@pytest.fixture
def bundle(spec, kernel):
    return identification.build_operators(spec, GAMMA, kernel, BETAS, WEIGHTS, COND)


class TestBuildOperators:
    def test_factorizations_hold(self, bundle):
        """Both operators factor through the type space."""
        assert bundle.residual_342 < 1e-12
        assert bundle.residual_32 < 1e-12

    def test_shapes(self, bundle, grid):
        """Rows are (a3, x3) pairs, a3-major."""
        n3, n2 = len(bundle.x3_states), len(bundle.x2_states)
        assert n3 == n2 == grid.size
        assert bundle.L_342.shape == (2 * n3, n2)
        assert bundle.L_3b.shape == (2 * n3, 2)
        assert bundle.L_b2.shape == (2, n2)
        np.testing.assert_allclose(bundle.L_3b[:n3] + bundle.L_3b[n3:], 1.0)

    def test_true_eigenvalues(self, bundle):
        """D4 holds P(a4; x4, b_r): high for the positive slope at x1 = 2."""
        d4 = np.diag(bundle.D4)
        assert d4[1] > 0.8 > 0.2 > d4[0]

    def test_random_type_sets_factor(self, spec, kernel):
        """Twenty random discrete-type models factor to numerical precision."""
        rng = np.random.default_rng(2718)
        support = np.array([-2.4, -1.2, 0.0, 1.2, 2.4])
        for _ in range(20):
            num_types = int(rng.integers(1, 5))
            betas = rng.choice(support, size=num_types, replace=False)[:, None]
            weights = 0.5 / num_types + 0.5 * rng.dirichlet(np.ones(num_types))
            random_bundle = identification.build_operators(spec, GAMMA, kernel, betas, weights, COND)
            assert random_bundle.residual_342 < 1e-10
            assert random_bundle.residual_32 < 1e-10

    def test_residual_tolerance(self, spec, kernel):
        with pytest.raises(DDCError) as exc:
            identification.build_operators(spec, GAMMA, kernel, BETAS, WEIGHTS, COND, tol=-1.0)
        assert exc.value.code == "FACTORIZATION_RESIDUAL"

    def test_weight_count_mismatch(self, spec, kernel):
        with pytest.raises(DDCError) as exc:
            identification.build_operators(spec, GAMMA, kernel, BETAS, [1.0], COND)
        assert exc.value.code == "DIMENSION_MISMATCH"

    def test_non_positive_weight(self, spec, kernel):
        with pytest.raises(DDCError) as exc:
            identification.build_operators(spec, GAMMA, kernel, BETAS, [1.0, 0.0], COND)
        assert exc.value.code == "CONFIG_INVALID"


class TestInjectivity:
    def test_distinct_types_injective(self, bundle):
        report = identification.injectivity_diagnostic(bundle)
        assert report.injective
        assert report.min_sv_L3b > 1e-3

    def test_single_type_singular_value_is_column_norm(self, spec, kernel):
        """With one type the smallest singular value is the norm of the only column."""
        single = identification.build_operators(spec, GAMMA, kernel, [[0.5]], [1.0], COND)
        report = identification.injectivity_diagnostic(single)
        assert report.min_sv_L3b == pytest.approx(np.linalg.norm(single.L_3b[:, 0]), rel=1e-12)
        assert report.min_sv_Lb2_adjoint == pytest.approx(np.linalg.norm(single.L_b2[0]), rel=1e-12)

    def test_duplicate_types_not_injective(self, spec, kernel):
        """Identical betas make L_3b rank deficient."""
        dup = identification.build_operators(spec, GAMMA, kernel, [[1.5], [1.5]], [0.5, 0.5], COND)
        assert not identification.injectivity_diagnostic(dup).injective
        with pytest.raises(DDCError) as exc:
            identification.spectral_recover(dup)
        assert exc.value.code == "NOT_INJECTIVE"


class TestSpectralRecover:
    def test_recovers_eigenvalues_and_ccps(self, bundle):
        """Eigenpairs equal the D4 entries and the L_3b columns."""
        recovery = identification.spectral_recover(bundle)
        assert recovery.eigenvalue_error < 1e-8
        assert recovery.ccp_error < 1e-8
        assert recovery.normalization_error < 1e-10
        assert sorted(recovery.matching) == [0, 1]

    def test_eigenvectors_normalized(self, bundle):
        """Recovered columns sum to one over a3 at every x3."""
        recovery = identification.spectral_recover(bundle)
        n3 = len(bundle.x3_states)
        np.testing.assert_allclose(recovery.ccps[:n3] + recovery.ccps[n3:], 1.0, atol=1e-10)

    def test_type_order_irrelevant(self, spec, kernel, bundle):
        """Listing the types in reverse recovers the same eigenvalues."""
        reverse = identification.build_operators(spec, GAMMA, kernel, BETAS[::-1], WEIGHTS[::-1], COND)
        a = identification.spectral_recover(bundle)
        b = identification.spectral_recover(reverse)
        np.testing.assert_allclose(np.sort(a.eigenvalues), np.sort(b.eigenvalues), atol=1e-10)
        assert b.eigenvalue_error < 1e-8

    def test_three_types(self, spec, kernel):
        bundle = identification.build_operators(spec, GAMMA, kernel, [[-2.0], [0.0], [2.0]], [0.3, 0.4, 0.3], COND)
        recovery = identification.spectral_recover(bundle)
        assert recovery.eigenvalue_error < 1e-6
        assert recovery.ccp_error < 1e-6

    def test_eigenvalue_collision(self, bundle):
        """A gap tolerance above the spread of the eigenvalues is a collision."""
        with pytest.raises(DDCError) as exc:
            identification.spectral_recover(bundle, gap_tol=1.0)
        assert exc.value.code == "EIGENVALUE_COLLISION"


class TestRecoverTypeWeights:
    def test_weights_recovered(self, bundle):
        recovery = identification.spectral_recover(bundle)
        weights = identification.recover_type_weights(bundle, recovery)
        assert weights.weight_error < 1e-8
        np.testing.assert_allclose(weights.weights, np.array(WEIGHTS)[list(recovery.matching)], atol=1e-8)

    def test_finite_horizon_unsupported(self, kernel):
        finite = ModelSpec(num_actions=2, state_dim=2, discount=0.9, random_coef_count=1, horizon=Horizon.finite(4))
        bundle = identification.build_operators(finite, GAMMA, kernel, BETAS, WEIGHTS, COND)
        assert not bundle.stationary
        recovery = identification.spectral_recover(bundle)
        with pytest.raises(DDCError) as exc:
            identification.recover_type_weights(bundle, recovery)
        assert exc.value.code == "UNSUPPORTED_HORIZON"

    def test_states_not_covered(self, spec, kernel):
        """x1 outside the retained x3 states cannot be read off the eigenvectors."""
        others = [s for s in range(15) if s != COND.x1]
        bundle = identification.build_operators(spec, GAMMA, kernel, BETAS, WEIGHTS, COND, x3_states=others)
        recovery = identification.spectral_recover(bundle)
        with pytest.raises(DDCError) as exc:
            identification.recover_type_weights(bundle, recovery)
        assert exc.value.code == "CONFIG_INVALID"
