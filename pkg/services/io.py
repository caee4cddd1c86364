"""File formats - panels, kernels, CDFs and JSON results.

CSV via pandas with round-trip float formatting; JSON with sorted keys so
identical runs produce identical bytes. Layouts are documented in
docs/formats.md.
"""

import json
import logging
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ddcsieve.domain.model import StateGrid, TransitionKernel
from ddcsieve.domain.montecarlo import McSummary
from ddcsieve.domain.panel import Panel
from ddcsieve.domain.sieve import EstimateResult, StepCdf
from ddcsieve.domain.solution import ValueFunction
from ddcsieve.exceptions import DDCError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _state_columns(dim: int) -> list[str]:
    return [f"x{k + 1}" for k in range(dim)]


def to_jsonable(value: Any) -> Any:
    """numpy/dataclass values as plain JSON types; non-finite floats become null."""
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        return float(value) if math.isfinite(value) else None
    return value


def write_json(payload: Any, path: Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n")
    return path


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text())


# =============================================================================
# Panels
# =============================================================================


def panel_frame(panel: Panel) -> pd.DataFrame:
    """Long format id, t, x1..xk, a (t starts at 1)."""
    n, periods = panel.n, panel.periods
    frame = pd.DataFrame(
        {
            "id": np.repeat(np.arange(n), periods),
            "t": np.tile(np.arange(1, periods + 1), n),
        }
    )
    values = panel.values.reshape(n * periods, -1)
    for k, col in enumerate(_state_columns(values.shape[1])):
        frame[col] = values[:, k]
    frame["a"] = panel.actions.ravel()
    return frame


def write_panel(panel: Panel, path: Path) -> Path:
    panel_frame(panel).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def read_panel(path: Path, grid: StateGrid, num_actions: int) -> Panel:
    """
    Read a balanced panel; states off the grid are projected to the nearest point.

    Raises:
        DDCError: PANEL_INVALID on missing columns, unbalanced panels or bad actions
    """
    frame = pd.read_csv(path)
    needed = ["id", "t", *_state_columns(grid.dim), "a"]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise DDCError("PANEL_INVALID", "Missing columns", columns=missing, path=str(path))
    frame = frame.sort_values(["id", "t"], kind="stable")
    sizes = frame.groupby("id", sort=True).size()
    if sizes.nunique() != 1:
        raise DDCError("PANEL_INVALID", "Panel is not balanced", path=str(path))
    n, periods = sizes.size, int(sizes.iloc[0])
    actions = frame["a"].to_numpy()
    if np.any((actions < 0) | (actions >= num_actions)) or not np.issubdtype(actions.dtype, np.integer):
        raise DDCError("PANEL_INVALID", "Actions must be integers in 0..num_actions-1", path=str(path))

    values = frame[_state_columns(grid.dim)].to_numpy(dtype=float)
    states = np.array([_project(grid, v) for v in values], dtype=np.int64)
    projected = int(sum(grid.index_of(v) is None for v in values))
    if projected:
        logger.info("read_panel: %d observations projected onto the grid", projected)
    return Panel(
        states=states.reshape(n, periods),
        actions=actions.reshape(n, periods),
        grid=grid,
        num_actions=num_actions,
        values=values.reshape(n, periods, grid.dim),
    )


def _project(grid: StateGrid, x: np.ndarray) -> int:
    exact = grid.index_of(x)
    return grid.nearest(x) if exact is None else exact


# =============================================================================
# Kernels, value functions, CCPs, CDFs
# =============================================================================


def write_kernel(kernel: TransitionKernel, path: Path) -> Path:
    """Every entry as a, from, to, prob."""
    A, S, _ = kernel.probs.shape
    a, src, dst = np.meshgrid(np.arange(A), np.arange(S), np.arange(S), indexing="ij")
    frame = pd.DataFrame({"a": a.ravel(), "from": src.ravel(), "to": dst.ravel(), "prob": kernel.probs.ravel()})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def read_kernel(path: Path, grid: StateGrid, num_actions: int) -> TransitionKernel:
    """Missing (a, from, to) rows are zero probability."""
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise DDCError("CONFIG_INVALID", "Kernel file not found", path=str(path)) from None
    if list(frame.columns) != ["a", "from", "to", "prob"]:
        raise DDCError("CONFIG_INVALID", "Kernel CSV needs columns a,from,to,prob", path=str(path))
    idx = frame[["a", "from", "to"]].to_numpy()
    if np.any(idx < 0) or np.any(idx[:, 0] >= num_actions) or np.any(idx[:, 1:] >= grid.size):
        raise DDCError("DIMENSION_MISMATCH", "Kernel index outside the grid or action set", path=str(path))
    probs = np.zeros((num_actions, grid.size, grid.size))
    probs[idx[:, 0], idx[:, 1], idx[:, 2]] = frame["prob"].to_numpy(dtype=float)
    return TransitionKernel(probs, grid)


def write_value_function(vf: ValueFunction, grid: StateGrid, path: Path) -> Path:
    """state, x1..xk, v (with a leading t column for a finite horizon)."""
    values = np.atleast_2d(vf.values)
    periods = values.shape[0]
    frame = pd.DataFrame({"state": np.tile(np.arange(grid.size), periods)})
    if not vf.horizon.is_infinite:
        frame.insert(0, "t", np.repeat(np.arange(1, periods + 1), grid.size))
    for k, col in enumerate(_state_columns(grid.dim)):
        frame[col] = np.tile(grid.points[:, k], periods)
    frame["v"] = values.ravel()
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def write_ccps(tables: list[np.ndarray], grid: StateGrid, path: Path, finite: bool = False) -> Path:
    """state, x1..xk, a, prob per (state, action); t column for a finite horizon."""
    stack = np.stack(tables)
    periods, S, A = stack.shape
    t, s, a = np.meshgrid(np.arange(1, periods + 1), np.arange(S), np.arange(A), indexing="ij")
    frame = pd.DataFrame({"state": s.ravel()})
    if finite:
        frame.insert(0, "t", t.ravel())
    for k, col in enumerate(_state_columns(grid.dim)):
        frame[col] = grid.points[s.ravel(), k]
    frame["a"] = a.ravel()
    frame["prob"] = stack.ravel()
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def write_cdf(cdf: StepCdf, path: Path) -> Path:
    """b, cdf at every grid point of the step CDF."""
    frame = pd.DataFrame({"b": cdf.points, "cdf": cdf(cdf.points)})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def read_cdf(path: Path) -> StepCdf:
    frame = pd.read_csv(path)
    levels = frame["cdf"].to_numpy(dtype=float)
    return StepCdf(frame["b"].to_numpy(dtype=float), np.diff(np.concatenate([[0.0], levels])))


# =============================================================================
# Results
# =============================================================================


def estimate_payload(result: EstimateResult) -> dict[str, Any]:
    """EstimateResult without wall-time."""
    diag = result.diagnostics
    return {
        "gamma_hat": result.gamma_hat,
        "loglik": result.loglik,
        "active_types": result.active_types,
        "grid": result.sieve.grid,
        "weights": result.sieve.weights,
        "marginal_weights": result.sieve.marginal_weights(),
        "x1_cells": [list(c) for c in result.sieve.partition.cells],
        "cell_mass": result.sieve.cell_mass,
        "diagnostics": {
            "search_evaluations": diag.search_evaluations,
            "search_converged": diag.search_converged,
            "inner_iterations": diag.inner_iterations,
            "max_solver_residual": diag.max_solver_residual,
            "empty_transition_cells": diag.empty_transition_cells,
            "trace": [{"gamma": p.gamma, "loglik": p.loglik} for p in diag.trace],
        },
    }


def montecarlo_payload(summary: McSummary) -> dict[str, Any]:
    """Per-n statistics and per-replication records, without wall-time."""
    per_n = []
    for s in summary.per_n:
        entry = asdict(s)
        entry.pop("median_seconds")
        per_n.append(entry)
    records = []
    for r in summary.records:
        entry = asdict(r)
        entry.pop("seconds")
        records.append(entry)
    return {"per_n": per_n, "records": records}


def montecarlo_timing(summary: McSummary) -> dict[str, Any]:
    return {
        "median_seconds": {str(s.n): s.median_seconds for s in summary.per_n},
        "records": [{"n": r.n, "replication": r.replication, "seconds": r.seconds} for r in summary.records],
    }


def montecarlo_table(summary: McSummary) -> pd.DataFrame:
    """Rows are metrics, columns are sample sizes."""
    columns = {}
    for s in summary.per_n:
        col: dict[str, float] = {}
        for k in range(len(s.gamma.bias)):
            suffix = f"_gamma{k + 1}"
            for name in ("bias", "variance", "mse", "scaled_bias", "scaled_variance", "scaled_mse"):
                col[name + suffix] = getattr(s.gamma, name)[k]
        col.update(
            {
                "mise": s.mise,
                "iae_mean": s.iae_mean,
                "iae_min": s.iae_min,
                "iae_max": s.iae_max,
                "types_mean": s.types_mean,
                "types_min": s.types_min,
                "types_max": s.types_max,
                "grid_points": s.grid_points,
                "replications": s.replications,
                "failures": s.failures,
            }
        )
        columns[str(s.n)] = col
    frame = pd.DataFrame(columns)
    frame.index.name = "metric"
    return frame


def write_montecarlo_table(summary: McSummary, path: Path) -> Path:
    montecarlo_table(summary).to_csv(path, float_format=FLOAT_FORMAT)
    return Path(path)


def write_bands(summary: McSummary, path: Path) -> Path:
    """n, b, median, lower, upper, truth for every sample size with bands."""
    frames = [
        pd.DataFrame(
            {
                "n": s.n,
                "b": s.bands.points,
                "median": s.bands.median,
                "lower": s.bands.lower,
                "upper": s.bands.upper,
                "truth": s.bands.truth,
            }
        )
        for s in summary.per_n
        if s.bands is not None
    ]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["n", "b", "median", "lower", "upper", "truth"])
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)
