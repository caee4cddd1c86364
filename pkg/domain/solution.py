"""Solver outputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ddcsieve.domain.model import Horizon, _frozen_array


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """
    Integrated value function over the state grid.

    Infinite horizon: values has shape (S,).
    Finite horizon: values has shape (T1, S), row t-1 holding v_t.
    """

    values: np.ndarray
    horizon: Horizon = field(default_factory=Horizon.infinite)
    iterations: int = 0
    residual: float = 0.0
    residuals: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))

    def period(self, t: int) -> np.ndarray:
        """v_t for t in 1..T1 (the stationary v for infinite horizon)."""
        if self.horizon.is_infinite:
            return self.values
        return self.values[t - 1]


@dataclass(frozen=True, eq=False)
class CcpTable:
    """Conditional choice probabilities P(a; x, b), probs[state, action]."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen_array(self.probs))

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]
