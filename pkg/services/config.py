"""RunConfig - strict JSON run configuration.

Every section is optional and falls back to the defaults below. Unknown keys
and ill-typed values raise CONFIG_INVALID naming the dotted path. The fully
resolved document (defaults filled in) is kept for output metadata.
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ddcsieve.domain.model import Horizon, ModelSpec, StateGrid, TransitionKernel
from ddcsieve.domain.montecarlo import DgpSpec, McConfig
from ddcsieve.domain.operators import LabConditioning, RankConditioning
from ddcsieve.domain.panel import MixtureComponent, MixtureSpec, PointMass, TruncatedNormal, baseline_mixture
from ddcsieve.domain.sieve import EstimatorConfig, GridConfig, SearchConfig
from ddcsieve.exceptions import DDCError
from ddcsieve.services import model as model_service

logger = logging.getLogger(__name__)

DEFAULTS: dict[str, Any] = {
    "seed": 20240917,
    "model": {
        "num_actions": 2,
        "state_dim": 2,
        "discount": 0.9,
        "random_coef_count": 1,
        "horizon": "infinite",
        "intercept_mode": False,
    },
    "grid": {"axes": [[0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 2.0, 4.0]], "points": None},
    "kernel": {
        "type": "ar1",
        "persistence": 0.6,
        "innovation_sd": 0.8,
        "drift": [[0.0, 0.0], [0.0, -0.5]],
        "path": None,
    },
    "kernel_estimation": {"method": None, "bandwidths": None},
    "mixture": {"preset": "baseline", "components": None},
    "simulation": {"n": 500, "periods": 8, "init": "uniform"},
    "gamma": [0.5],
    "solve": {"beta": [2.5]},
    "estimator": {
        "beta_support": [[0.0, 6.0]],
        "grid_size": None,
        "x1_cells": None,
        "gamma_box": [[-2.0, 3.0]],
        "gamma_start": None,
        "max_evals": None,
        "xtol": None,
        "inner_tol": None,
        "inner_max_iter": None,
        "active_threshold": None,
    },
    "montecarlo": {"sample_sizes": [100, 500, 1000], "replications": 100, "band_points": 121},
    "rank": {
        "mode": "population",
        "a1": 1,
        "a2": 0,
        "a3": 1,
        "x1": 0,
        "rel_threshold": None,
        "abs_threshold": None,
        "min_count": None,
        "types": [{"beta": [1.0], "weight": 0.3}, {"beta": [2.5], "weight": 0.4}, {"beta": [4.0], "weight": 0.3}],
    },
    "identification": {
        "a1": 1,
        "a4": 1,
        "x1": 0,
        "x4": 4,
        "types": [{"beta": [1.0], "weight": 0.3}, {"beta": [2.5], "weight": 0.4}, {"beta": [4.0], "weight": 0.3}],
    },
    "solver": {"tol": None, "max_iter": None},
}

_MISSING = object()

_SOLVER_SETTINGS = {"tol": "SOLVER_TOL", "max_iter": "SOLVER_MAX_ITER"}


def _fail(path: str, message: str, **context) -> DDCError:
    return DDCError("CONFIG_INVALID", f"{path}: {message}", path=path, **context)


def _merge(defaults: dict, given: dict, path: str) -> dict:
    """Defaults overlaid with `given`; nested dicts merged, unknown keys rejected."""
    if not isinstance(given, dict):
        raise _fail(path or "<root>", "expected an object")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        sub = f"{path}.{key}" if path else key
        if key not in defaults:
            raise _fail(sub, "unknown key")
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], value, sub)
        else:
            out[key] = value
    return out


def _number(doc: dict, path: str, value=_MISSING, *, allow_none: bool = False) -> float | None:
    value = _lookup(doc, path) if value is _MISSING else value
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise _fail(path, "expected a number", got=repr(value))
    return float(value)


def _integer(doc: dict, path: str, minimum: int | None = None, *, allow_none: bool = False) -> int | None:
    value = _lookup(doc, path)
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(path, "expected an integer", got=repr(value))
    if minimum is not None and value < minimum:
        raise _fail(path, f"must be at least {minimum}", got=value)
    return value


def _vector(doc: dict, path: str, value=_MISSING, *, allow_none: bool = False) -> tuple[float, ...] | None:
    value = _lookup(doc, path) if value is _MISSING else value
    if value is None and allow_none:
        return None
    if not isinstance(value, list) or not value:
        raise _fail(path, "expected a non-empty list of numbers")
    return tuple(_number(doc, f"{path}[{i}]", v) for i, v in enumerate(value))


def _boxes(doc: dict, path: str) -> tuple[tuple[float, float], ...]:
    value = _lookup(doc, path)
    if not isinstance(value, list) or not value:
        raise _fail(path, "expected a list of [lo, hi] pairs")
    boxes = []
    for i, pair in enumerate(value):
        lo, hi = _vector(doc, f"{path}[{i}]", pair)[:2] if isinstance(pair, list) and len(pair) == 2 else (None, None)
        if lo is None or not lo < hi:
            raise _fail(f"{path}[{i}]", "expected [lo, hi] with lo < hi")
        boxes.append((lo, hi))
    return tuple(boxes)


def _lookup(doc: dict, path: str):
    node = doc
    for part in path.split("."):
        node = node[part]
    return node


def _choice(doc: dict, path: str, options) -> Any:
    value = _lookup(doc, path)
    if value not in options:
        raise _fail(path, f"expected one of {sorted(map(str, options))}", got=repr(value))
    return value


# =============================================================================
# Section builders
# =============================================================================


def _model(doc: dict) -> ModelSpec:
    horizon = _lookup(doc, "model.horizon")
    if horizon == "infinite":
        horizon = Horizon.infinite()
    elif isinstance(horizon, int) and not isinstance(horizon, bool) and horizon >= 1:
        horizon = Horizon.finite(horizon)
    else:
        raise _fail("model.horizon", 'expected "infinite" or a positive integer', got=repr(horizon))
    intercept = _lookup(doc, "model.intercept_mode")
    if not isinstance(intercept, bool):
        raise _fail("model.intercept_mode", "expected a boolean")
    spec = ModelSpec(
        num_actions=_integer(doc, "model.num_actions", 2),
        state_dim=_integer(doc, "model.state_dim", 1),
        discount=_number(doc, "model.discount"),
        random_coef_count=_integer(doc, "model.random_coef_count", 1),
        horizon=horizon,
        intercept_mode=intercept,
    )
    if not 0.0 <= spec.discount < 1.0:
        raise _fail("model.discount", "must lie in [0, 1)", got=spec.discount)
    if not spec.layout_consistent:
        raise _fail("model.random_coef_count", "does not fit the payoff layout")
    return spec


def _grid(doc: dict, spec: ModelSpec) -> tuple[StateGrid, list[list[float]] | None]:
    points = _lookup(doc, "grid.points")
    if points is not None:
        if not isinstance(points, list) or not points:
            raise _fail("grid.points", "expected a list of state vectors")
        grid = StateGrid(np.array([_vector(doc, f"grid.points[{i}]", p) for i, p in enumerate(points)]))
        axes = None
    else:
        raw = _lookup(doc, "grid.axes")
        if not isinstance(raw, list) or not raw:
            raise _fail("grid.axes", "expected a list of axes")
        axes = [list(_vector(doc, f"grid.axes[{i}]", ax)) for i, ax in enumerate(raw)]
        grid = model_service.product_grid(axes)
    if grid.dim != spec.state_dim:
        raise _fail("grid", "grid dimension differs from model.state_dim", got=grid.dim, expected=spec.state_dim)
    return grid, axes


def _kernel(doc: dict, spec: ModelSpec, grid: StateGrid, axes, base: Path | None) -> TransitionKernel:
    kind = _choice(doc, "kernel.type", ("ar1", "csv"))
    if kind == "csv":
        from ddcsieve.services import io

        path = _lookup(doc, "kernel.path")
        if not isinstance(path, str):
            raise _fail("kernel.path", "expected a file path")
        full = Path(path) if base is None or Path(path).is_absolute() else base / path
        return io.read_kernel(full, grid, spec.num_actions)
    if axes is None:
        raise _fail("kernel.type", "ar1 needs grid.axes")
    drift = _lookup(doc, "kernel.drift")
    if drift is not None:
        drift = [list(_vector(doc, f"kernel.drift[{a}]", row)) for a, row in enumerate(drift)]
        if len(drift) != spec.num_actions or any(len(row) != len(axes) for row in drift):
            raise _fail("kernel.drift", "expected one drift vector per action", shape=[len(drift)])
    return model_service.ar1_kernel(
        axes,
        persistence=_number(doc, "kernel.persistence"),
        innovation_sd=_number(doc, "kernel.innovation_sd"),
        drift=drift,
        num_actions=spec.num_actions,
    )


def _mixture(doc: dict) -> MixtureSpec:
    components = _lookup(doc, "mixture.components")
    if components is None:
        _choice(doc, "mixture.preset", ("baseline",))
        return baseline_mixture()
    if not isinstance(components, list) or not components:
        raise _fail("mixture.components", "expected a non-empty list")
    out = []
    for i, comp in enumerate(components):
        path = f"mixture.components[{i}]"
        if not isinstance(comp, dict):
            raise _fail(path, "expected an object")
        kind = comp.get("family")
        allowed = {"point": {"family", "weight", "b"}, "truncnorm": {"family", "weight", "mu", "sigma", "lo", "hi"}}
        if kind not in allowed:
            raise _fail(f"{path}.family", 'expected "point" or "truncnorm"', got=repr(kind))
        extra = set(comp) - allowed[kind]
        if extra:
            raise _fail(f"{path}.{sorted(extra)[0]}", "unknown key")
        missing = allowed[kind] - set(comp)
        if missing:
            raise _fail(f"{path}.{sorted(missing)[0]}", "missing key")
        weight = _number(doc, f"{path}.weight", comp["weight"])
        if kind == "point":
            family = PointMass(_vector(doc, f"{path}.b", comp["b"]))
        else:
            family = TruncatedNormal(
                *(_vector(doc, f"{path}.{key}", comp[key]) for key in ("mu", "sigma", "lo", "hi"))
            )
        out.append(MixtureComponent(weight, family))
    return MixtureSpec(tuple(out))


def _init_dist(doc: dict, grid: StateGrid) -> np.ndarray:
    init = _lookup(doc, "simulation.init")
    if init == "uniform":
        return model_service.uniform_init(grid)
    probs = np.asarray(_vector(doc, "simulation.init", init))
    if probs.size != grid.size or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise _fail("simulation.init", "expected a probability vector over the grid")
    return probs


def _estimator(doc: dict) -> EstimatorConfig:
    cells = _lookup(doc, "estimator.x1_cells")
    if cells is not None:
        if not isinstance(cells, list) or not all(isinstance(c, list) and c for c in cells):
            raise _fail("estimator.x1_cells", "expected a list of non-empty state index lists")
        cells = tuple(tuple(int(s) for s in c) for c in cells)
    start = _vector(doc, "estimator.gamma_start", allow_none=True)
    method = _lookup(doc, "kernel_estimation.method")
    if method is not None:
        _choice(doc, "kernel_estimation.method", ("frequency", "kernel_density"))
    bandwidths = _lookup(doc, "kernel_estimation.bandwidths")
    if bandwidths is not None:
        if not isinstance(bandwidths, list) or len(bandwidths) != 2:
            raise _fail("kernel_estimation.bandwidths", "expected [h_next, h_from]")
        bandwidths = tuple(_vector(doc, f"kernel_estimation.bandwidths[{i}]", h) for i, h in enumerate(bandwidths))
    return EstimatorConfig(
        grid=GridConfig(
            beta_support=_boxes(doc, "estimator.beta_support"),
            size=_integer(doc, "estimator.grid_size", 1, allow_none=True),
            x1_cells=cells,
        ),
        search=SearchConfig(
            gamma_box=_boxes(doc, "estimator.gamma_box"),
            start=start,
            max_evals=_integer(doc, "estimator.max_evals", 1, allow_none=True),
            xtol=_number(doc, "estimator.xtol", allow_none=True),
        ),
        inner_tol=_number(doc, "estimator.inner_tol", allow_none=True),
        inner_max_iter=_integer(doc, "estimator.inner_max_iter", 1, allow_none=True),
        active_threshold=_number(doc, "estimator.active_threshold", allow_none=True),
        transition_method=method,
        bandwidths=bandwidths,
    )


@dataclass(frozen=True)
class TypeSet:
    """Discrete type distribution for the rank estimator and the lab."""

    betas: np.ndarray
    weights: np.ndarray


def _types(doc: dict, path: str, spec: ModelSpec) -> TypeSet:
    raw = _lookup(doc, path)
    if not isinstance(raw, list) or not raw:
        raise _fail(path, "expected a non-empty list of {beta, weight}")
    betas, weights = [], []
    for i, item in enumerate(raw):
        sub = f"{path}[{i}]"
        if not isinstance(item, dict) or set(item) != {"beta", "weight"}:
            raise _fail(sub, "expected exactly the keys beta and weight")
        beta = _vector(doc, f"{sub}.beta", item["beta"])
        if len(beta) != spec.random_coef_count:
            raise _fail(f"{sub}.beta", "length differs from model.random_coef_count", got=len(beta))
        betas.append(beta)
        weights.append(_number(doc, f"{sub}.weight", item["weight"]))
    return TypeSet(np.array(betas), np.array(weights))


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    periods: int
    init_dist: np.ndarray


@dataclass(frozen=True)
class RankConfig:
    mode: str
    conditioning: RankConditioning
    rel_threshold: float | None
    abs_threshold: float | None
    min_count: int | None
    types: TypeSet


@dataclass(frozen=True)
class LabConfig:
    conditioning: LabConditioning
    types: TypeSet


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Parsed and validated run configuration."""

    seed: int
    model: ModelSpec
    grid: StateGrid
    kernel: TransitionKernel
    mixture: MixtureSpec
    simulation: SimulationConfig
    gamma: np.ndarray
    solve_beta: np.ndarray
    estimator: EstimatorConfig
    montecarlo: McConfig
    rank: RankConfig
    identification: LabConfig
    violations: tuple = ()
    solver_settings: dict[str, Any] = field(default_factory=dict)
    resolved: dict[str, Any] = field(default_factory=dict)


def _state_index(doc: dict, path: str, grid: StateGrid) -> int:
    value = _integer(doc, path, 0)
    if value >= grid.size:
        raise _fail(path, "state index outside the grid", got=value, size=grid.size)
    return value


def _action(doc: dict, path: str, spec: ModelSpec) -> int:
    value = _integer(doc, path, 0)
    if value >= spec.num_actions:
        raise _fail(path, "action outside the action set", got=value)
    return value


def parse(document: dict, base: Path | None = None, seed: int | None = None) -> RunConfig:
    """
    Validate a RunConfig document and build every section.

    Raises:
        DDCError: CONFIG_INVALID naming the offending dotted path
    """
    doc = _merge(DEFAULTS, document, "")
    if seed is not None:
        doc["seed"] = seed
    seed_value = _integer(doc, "seed", 0)

    spec = _model(doc)
    grid, axes = _grid(doc, spec)
    kernel = _kernel(doc, spec, grid, axes, base)
    violations = tuple(model_service.validate(spec, grid, kernel))

    gamma = np.asarray(_vector(doc, "gamma"))
    if gamma.size != spec.gamma_size:
        raise _fail("gamma", "length differs from the payoff layout", got=gamma.size, expected=spec.gamma_size)
    solve_beta = np.asarray(_vector(doc, "solve.beta"))
    if solve_beta.size != spec.random_coef_count:
        raise _fail("solve.beta", "length differs from model.random_coef_count", got=solve_beta.size)

    mixture = _mixture(doc)
    simulation = SimulationConfig(
        n=_integer(doc, "simulation.n", 1),
        periods=_integer(doc, "simulation.periods", 1),
        init_dist=_init_dist(doc, grid),
    )
    estimator = _estimator(doc)

    sample_sizes = _lookup(doc, "montecarlo.sample_sizes")
    if not isinstance(sample_sizes, list) or not sample_sizes:
        raise _fail("montecarlo.sample_sizes", "expected a non-empty list of integers")
    for i, value in enumerate(sample_sizes):
        if isinstance(value, bool) or not isinstance(value, int) or value < 10:
            raise _fail(f"montecarlo.sample_sizes[{i}]", "expected an integer >= 10", got=repr(value))
    dgp = DgpSpec(spec, mixture, gamma, kernel, simulation.periods, simulation.init_dist)
    montecarlo = McConfig(
        sample_sizes=tuple(sample_sizes),
        replications=_integer(doc, "montecarlo.replications", 1),
        dgp=dgp,
        seed=seed_value,
        estimator=estimator,
        band_points=_integer(doc, "montecarlo.band_points", 2),
    )

    rank = RankConfig(
        mode=_choice(doc, "rank.mode", ("population", "sample")),
        conditioning=RankConditioning(
            a1=_action(doc, "rank.a1", spec),
            a2=_action(doc, "rank.a2", spec),
            a3=_action(doc, "rank.a3", spec),
            x1=_state_index(doc, "rank.x1", grid),
        ),
        rel_threshold=_number(doc, "rank.rel_threshold", allow_none=True),
        abs_threshold=_number(doc, "rank.abs_threshold", allow_none=True),
        min_count=_integer(doc, "rank.min_count", 0, allow_none=True),
        types=_types(doc, "rank.types", spec),
    )
    identification = LabConfig(
        conditioning=LabConditioning(
            a1=_action(doc, "identification.a1", spec),
            a4=_action(doc, "identification.a4", spec),
            x1=_state_index(doc, "identification.x1", grid),
            x4=_state_index(doc, "identification.x4", grid),
        ),
        types=_types(doc, "identification.types", spec),
    )

    solver_settings = {}
    for key, setting in _SOLVER_SETTINGS.items():
        value = _lookup(doc, f"solver.{key}")
        if value is not None:
            solver_settings[setting] = (
                _integer(doc, f"solver.{key}", 1) if key == "max_iter" else _number(doc, f"solver.{key}")
            )

    logger.debug("parse: resolved config with %d grid states", grid.size)
    return RunConfig(
        seed=seed_value,
        model=spec,
        grid=grid,
        kernel=kernel,
        mixture=mixture,
        simulation=simulation,
        gamma=gamma,
        solve_beta=solve_beta,
        estimator=estimator,
        montecarlo=montecarlo,
        rank=rank,
        identification=identification,
        violations=violations,
        solver_settings=solver_settings,
        resolved=doc,
    )


def load(path: str | Path | None, seed: int | None = None) -> RunConfig:
    """Read and parse a RunConfig file; None gives the all-defaults config."""
    if path is None:
        return parse({}, seed=seed)
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except FileNotFoundError:
        raise DDCError("CONFIG_INVALID", "Config file not found", path=str(path)) from None
    except json.JSONDecodeError as exc:
        raise DDCError("CONFIG_INVALID", f"Malformed JSON: {exc.msg}", path=str(path), line=exc.lineno) from None
    return parse(document, base=path.parent, seed=seed)
