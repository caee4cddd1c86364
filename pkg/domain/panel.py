"""Type distributions and observed panels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ddcsieve.domain.model import StateGrid, _frozen_array


@dataclass(frozen=True)
class TruncatedNormal:
    """Coordinate-wise independent truncated normal (sigma is the standard deviation)."""

    mu: tuple[float, ...]
    sigma: tuple[float, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.mu)

    def _frozen(self):
        mu, sigma = np.asarray(self.mu), np.asarray(self.sigma)
        a = (np.asarray(self.lo) - mu) / sigma
        b = (np.asarray(self.hi) - mu) / sigma
        return stats.truncnorm(a, b, loc=mu, scale=sigma)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF on the truncated interval, u of shape (n, dim)."""
        return self._frozen().ppf(u)

    def cdf(self, b) -> np.ndarray:
        return self._frozen().cdf(b)

    def mean(self) -> np.ndarray:
        return self._frozen().mean()


@dataclass(frozen=True)
class PointMass:
    b: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.b)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.b, dtype=float), u.shape).copy()

    def cdf(self, b) -> np.ndarray:
        return (np.asarray(b, dtype=float) >= np.asarray(self.b)).astype(float)

    def mean(self) -> np.ndarray:
        return np.asarray(self.b, dtype=float)


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    family: TruncatedNormal | PointMass


@dataclass(frozen=True)
class MixtureSpec:
    """Finite mixture of truncated normals and point masses for beta."""

    components: tuple[MixtureComponent, ...]

    @property
    def dim(self) -> int:
        return self.components[0].family.dim

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components], dtype=float)

    def cdf(self, b) -> np.ndarray:
        """Scalar-beta mixture CDF."""
        b = np.asarray(b, dtype=float)
        total = np.zeros_like(b)
        for comp in self.components:
            total = total + comp.weight * np.asarray(comp.family.cdf(b), dtype=float).reshape(b.shape)
        return total

    def mean(self) -> np.ndarray:
        return sum(c.weight * np.atleast_1d(c.family.mean()) for c in self.components)

    @property
    def breakpoints(self) -> np.ndarray:
        """Jump locations of the scalar CDF (point-mass atoms)."""
        atoms = [c.family.b[0] for c in self.components if isinstance(c.family, PointMass)]
        return np.unique(np.asarray(atoms, dtype=float))

    @property
    def support(self) -> tuple[float, float]:
        """Bounded scalar support covering every component."""
        los, his = [], []
        for c in self.components:
            if isinstance(c.family, PointMass):
                los.append(c.family.b[0])
                his.append(c.family.b[0])
            else:
                los.append(c.family.lo[0])
                his.append(c.family.hi[0])
        return float(min(los)), float(max(his))


def baseline_mixture() -> MixtureSpec:
    """Equal-weight N_tr(1.5, 1), N_tr(2.5, 0.25), N_tr(3.5, 1) on [0, 50]."""
    third = 1.0 / 3.0
    return MixtureSpec(
        tuple(
            MixtureComponent(third, TruncatedNormal((mu,), (sd,), (0.0,), (50.0,)))
            for mu, sd in ((1.5, 1.0), (2.5, 0.25), (3.5, 1.0))
        )
    )


@dataclass(frozen=True, eq=False)
class Panel:
    """
    Observed (x_it, a_it) for n individuals over T periods.

    states[i, t] is the grid index, values[i, t] the observed state vector
    (grid point for simulated panels, raw value for ingested continuous ones).
    """

    states: np.ndarray
    actions: np.ndarray
    grid: StateGrid
    num_actions: int
    values: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen_array(self.states, dtype=np.int64))
        object.__setattr__(self, "actions", _frozen_array(self.actions, dtype=np.int64))
        values = self.grid.points[self.states] if self.values is None else self.values
        object.__setattr__(self, "values", _frozen_array(values))

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def periods(self) -> int:
        return self.states.shape[1]

    @property
    def initial_states(self) -> np.ndarray:
        return self.states[:, 0]
