"""Tests for the first-step transition estimators."""

import numpy as np
import pytest

from ddcsieve.domain import Panel, StateGrid
from ddcsieve.exceptions import DDCError
from ddcsieve.gates import Gates
from ddcsieve.protocols import TransitionEstimator
from ddcsieve.services import model as model_service
from ddcsieve.services import transition

# five-state chain; action 1 drifts up
CHAIN = model_service.ar1_kernel(
    [[-2.0, -1.0, 0.0, 1.0, 2.0]], persistence=0.6, innovation_sd=1.5, drift=[[0.0], [0.5]]
)


def chain_panel(n: int, periods: int, seed: int) -> Panel:
    """States follow CHAIN; actions are fair coin flips independent of the state."""
    rng = np.random.default_rng(seed)
    actions = rng.integers(0, 2, size=(n, periods))
    states = np.empty((n, periods), dtype=np.int64)
    states[:, 0] = rng.integers(0, CHAIN.num_states, size=n)
    cum = np.cumsum(CHAIN.probs, axis=2)
    for t in range(1, periods):
        rows = cum[actions[:, t - 1], states[:, t - 1]]
        drawn = (rng.random(n)[:, None] > rows).sum(axis=1)
        states[:, t] = np.minimum(drawn, CHAIN.num_states - 1)
    return Panel(states, actions, CHAIN.grid, 2)


def mean_row_l1(est) -> float:
    return float(np.abs(est.kernel.probs - CHAIN.probs).sum(axis=2).mean())


class TestFrequencyEstimator:
    """Tests for estimate_frequency."""

    def test_recovers_kernel(self, indifferent_panel, kernel):
        """Large-sample frequencies are close to the true kernel."""
        est = transition.estimate_frequency(indifferent_panel)
        assert est.method == "frequency"
        assert est.empty_cells == ()
        error = np.abs(est.kernel.probs - kernel.probs).max(axis=2)
        busy = est.cell_counts >= 400
        assert busy.any()
        assert error[busy].max() < 0.1

    def test_row_error_at_fifty_thousand_transitions(self):
        """50,000 observed transitions on a five-state kernel: every row within 0.05 in L1."""
        est = transition.estimate_frequency(chain_panel(10_000, 6, seed=13))
        assert est.empty_cells == ()
        row_l1 = np.abs(est.kernel.probs - CHAIN.probs).sum(axis=2)
        assert row_l1.max() < 0.05

    def test_rows_are_stochastic(self, two_type_panel):
        """The estimate is a valid kernel."""
        est = transition.estimate_frequency(two_type_panel)
        assert Gates.check_row_stochastic(est.kernel)

    def test_cell_counts(self, two_type_panel):
        """Counts add up to n (T - 1) transitions."""
        est = transition.estimate_frequency(two_type_panel)
        assert est.cell_counts.sum() == 200 * 3

    def test_empty_cells_uniform(self):
        """Unvisited (action, state) cells become uniform rows and are flagged."""
        grid = StateGrid([0.0, 1.0, 2.0])
        panel = Panel(np.array([[0, 1], [0, 0]]), np.array([[0, 0], [0, 1]]), grid, 2)
        est = transition.estimate_frequency(panel)
        np.testing.assert_allclose(est.kernel.probs[0, 0], [0.5, 0.5, 0.0])
        np.testing.assert_allclose(est.kernel.probs[1, 2], [1 / 3, 1 / 3, 1 / 3])
        assert (1, 2) in est.empty_cells
        assert (0, 0) not in est.empty_cells

    def test_single_period_panel(self):
        """Transitions need two periods."""
        grid = StateGrid([0.0, 1.0])
        panel = Panel(np.zeros((3, 1)), np.zeros((3, 1)), grid, 2)
        with pytest.raises(DDCError) as exc:
            transition.estimate_frequency(panel)
        assert exc.value.code == "PANEL_INVALID"


class TestKernelDensityEstimator:
    """Tests for estimate_kernel_density."""

    def test_rows_are_stochastic(self, two_type_panel):
        """Row-normalized on the grid."""
        est = transition.estimate_kernel_density(two_type_panel)
        assert est.method == "kernel_density"
        np.testing.assert_allclose(est.kernel.probs.sum(axis=2), 1.0, atol=1e-12)
        assert len(est.bandwidths) == 2

    def test_small_bandwidth_is_frequency(self, indifferent_panel):
        """Vanishing bandwidths reproduce the cell frequencies."""
        kde = transition.estimate_kernel_density(indifferent_panel, bandwidths=((1e-3, 1e-3), (1e-3, 1e-3)))
        freq = transition.estimate_frequency(indifferent_panel)
        np.testing.assert_allclose(kde.kernel.probs, freq.kernel.probs, atol=1e-12)

    def test_error_falls_with_sample_size(self):
        """Silverman bandwidths: a larger panel estimates the kernel better."""
        small = transition.estimate_kernel_density(chain_panel(100, 4, seed=1))
        large = transition.estimate_kernel_density(chain_panel(4000, 4, seed=2))
        assert mean_row_l1(large) < mean_row_l1(small)

    def test_flat_source_kernel_gives_marginal(self):
        """A huge h_from ignores x: every row is the marginal of x' given a."""
        panel = chain_panel(2000, 4, seed=5)
        est = transition.estimate_kernel_density(panel, bandwidths=(1e-3, 1e6))
        act = panel.actions[:, :-1].ravel()
        dst = panel.states[:, 1:].ravel()
        for a in (0, 1):
            marginal = np.bincount(dst[act == a], minlength=CHAIN.num_states) / np.sum(act == a)
            np.testing.assert_allclose(est.kernel.probs[a], np.tile(marginal, (CHAIN.num_states, 1)), atol=1e-8)

    def test_explicit_bandwidths_recorded(self, two_type_panel):
        """Scalar bandwidths broadcast per dimension."""
        est = transition.estimate_kernel_density(two_type_panel, bandwidths=(0.5, 0.7))
        assert est.bandwidths == ((0.5, 0.5), (0.7, 0.7))


class TestSilvermanBandwidth:
    """Tests for silverman_bandwidth."""

    def test_constant_column_falls_back(self):
        """Zero spread gives bandwidth 1."""
        values = np.column_stack([np.zeros(10), np.arange(10.0)])
        h = transition.silverman_bandwidth(values)
        assert h[0] == 1.0
        assert h[1] > 0

    def test_rule_of_thumb(self):
        """0.9 min(sd, IQR / 1.34) n^(-1/5)."""
        values = np.arange(100.0)[:, None]
        sd = values.std(ddof=1)
        iqr = np.subtract(*np.percentile(values, [75, 25]))
        expected = 0.9 * min(sd, iqr / 1.34) * 100 ** (-0.2)
        assert transition.silverman_bandwidth(values)[0] == pytest.approx(expected)


class TestEstimatorSelection:
    """Tests for get_transition_estimator."""

    def test_default_from_settings(self):
        """FrequencyEstimator unless configured otherwise."""
        est = transition.get_transition_estimator()
        assert isinstance(est, transition.FrequencyEstimator)
        assert isinstance(est, TransitionEstimator)

    def test_setting_override(self, settings):
        """TRANSITION_ESTIMATOR selects the class by dotted path."""
        settings.DDCSIEVE = {"TRANSITION_ESTIMATOR": "ddcsieve.services.transition.KernelDensityEstimator"}
        assert isinstance(transition.get_transition_estimator(), transition.KernelDensityEstimator)

    def test_method_name(self):
        """An explicit method wins over the setting."""
        est = transition.get_transition_estimator("kernel_density", bandwidths=(0.3, 0.3))
        assert est.bandwidths == (0.3, 0.3)

    def test_unknown_method(self):
        """Unknown names are a configuration error."""
        with pytest.raises(DDCError) as exc:
            transition.get_transition_estimator("histogram")
        assert exc.value.code == "CONFIG_INVALID"
