"""First-step transition estimator protocol."""

from typing import Protocol, runtime_checkable

from ddcsieve.domain.model import StateGrid
from ddcsieve.domain.panel import Panel
from ddcsieve.domain.sieve import TransitionEstimate


@runtime_checkable
class TransitionEstimator(Protocol):
    """
    Protocol for estimating F_x from an observed panel.

    Implemented by services.transition.FrequencyEstimator and
    services.transition.KernelDensityEstimator.

    Configuration in settings.py:
        DDCSIEVE = {
            "TRANSITION_ESTIMATOR": "ddcsieve.services.transition.KernelDensityEstimator",
        }
    """

    method: str

    def estimate(self, panel: Panel, grid: StateGrid | None = None) -> TransitionEstimate:
        """
        Estimate the kernel on the grid.

        Args:
            panel: Observed panel
            grid: Evaluation grid (defaults to the panel's grid)

        Returns:
            TransitionEstimate with a row-stochastic kernel
        """
        ...
