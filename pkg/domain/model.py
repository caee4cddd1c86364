"""Structural model definition (actions, state grid, transition, payoffs).

Payoff layout:
    Actions are 0..num_actions-1; action 0 is the outside good with u(x, 0) = 0.
    Each inside action a carries a coefficient vector on x built as
    (beta_a, gamma_a): the random block beta_a comes first and multiplies the
    first `random_slope_count` state components, gamma_a multiplies the rest.
    With intercept_mode, beta_a starts with a random intercept.

    beta  = (beta_1, ..., beta_|A|)    blocks of `coef_per_action`
    gamma = (gamma_1, ..., gamma_|A|)  blocks of `gamma_per_action`

All types are immutable: arrays are copied and flagged read-only on
construction so they can be shared across joblib workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Horizon:
    """Infinite horizon (periods=None) or finite horizon with T1 periods."""

    periods: int | None = None

    @classmethod
    def infinite(cls) -> Horizon:
        return cls(None)

    @classmethod
    def finite(cls, periods: int) -> Horizon:
        return cls(int(periods))

    @property
    def is_infinite(self) -> bool:
        return self.periods is None

    def as_json(self) -> str | int:
        return "infinite" if self.is_infinite else self.periods


@dataclass(frozen=True)
class ModelSpec:
    """Structural DDC model (discount, action set, payoff layout, horizon)."""

    num_actions: int
    state_dim: int
    discount: float
    random_coef_count: int
    horizon: Horizon = field(default_factory=Horizon.infinite)
    intercept_mode: bool = False

    @property
    def inside_actions(self) -> int:
        return self.num_actions - 1

    @property
    def coef_per_action(self) -> int:
        return self.random_coef_count // max(self.inside_actions, 1)

    @property
    def random_slope_count(self) -> int:
        return self.coef_per_action - int(self.intercept_mode)

    @property
    def gamma_per_action(self) -> int:
        return self.state_dim - self.random_slope_count

    @property
    def gamma_size(self) -> int:
        return self.inside_actions * self.gamma_per_action

    @property
    def layout_consistent(self) -> bool:
        inside = self.inside_actions
        if inside < 1 or self.random_coef_count % inside:
            return False
        return 0 <= self.random_slope_count <= self.state_dim


@dataclass(frozen=True, eq=False)
class StateGrid:
    """Finite set of distinct state vectors; row index is the state id."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        object.__setattr__(self, "points", _frozen_array(pts))
        lookup = {tuple(p): i for i, p in enumerate(pts.tolist())}
        object.__setattr__(self, "_lookup", lookup)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def index_of(self, x) -> int | None:
        """Exact index of a state vector, None when not on the grid."""
        return self._lookup.get(tuple(float(v) for v in np.atleast_1d(x)))

    def nearest(self, x) -> int:
        """Nearest grid state (Euclidean); ties resolve to the lowest index."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return int(np.argmin(((self.points - x) ** 2).sum(axis=1)))


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """F_x over a grid, probs[a, from, to]."""

    probs: np.ndarray
    grid: StateGrid

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen_array(self.probs))

    @property
    def num_actions(self) -> int:
        return self.probs.shape[0]

    @property
    def num_states(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True, eq=False)
class PayoffParams:
    """Homogeneous gamma and one type's beta."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma", _frozen_array(np.atleast_1d(self.gamma)))
        object.__setattr__(self, "beta", _frozen_array(np.atleast_1d(self.beta)))

    def cache_key(self) -> tuple[bytes, bytes]:
        """Exact bit pattern, used to memoize solves."""
        return self.gamma.tobytes(), self.beta.tobytes()
