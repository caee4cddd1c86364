"""
DDCSieve configuration.

Usage in settings.py:
    DDCSIEVE = {
        "SOLVER_TOL": 1e-10,
        "N_JOBS": 4,
    }

Outside a Django project (plain library use) the dataclass defaults apply.
Per-run values from a RunConfig document override these defaults.
"""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import asdict, dataclass
from typing import Any

from django.conf import settings


@dataclass
class DDCSieveSettings:
    """DDCSieve configuration settings."""

    # Bellman iteration (sup-norm on v)
    SOLVER_TOL: float = 1e-10
    SOLVER_MAX_ITER: int = 10_000

    # EM inner solve (relative log-likelihood gain)
    EM_TOL: float = 1e-9
    EM_MAX_ITER: int = 5_000

    # Share of total mass above which a grid point counts as a type
    ACTIVE_TYPE_THRESHOLD: float = 1e-3

    # Rank estimator
    RATIO_FLOOR: float = 1e-8
    RANK_REL_THRESHOLD: float = 1e-6
    RANK_MIN_CELL_COUNT: int = 5

    # Identification lab
    PINV_RCOND: float = 1e-12
    FACTORIZATION_TOL: float = 1e-10
    EIGEN_GAP_TOL: float = 1e-8
    INJECTIVITY_TOL: float = 1e-10

    # Profile search over gamma
    SEARCH_MAX_EVALS: int = 200
    SEARCH_XTOL: float = 1e-4

    # CDF error integrals
    INTEGRATION_TOL: float = 1e-8

    # joblib workers (0 or -1 = all cores)
    N_JOBS: int = 1

    # First-step estimator (dotted path, see protocols.transition)
    TRANSITION_ESTIMATOR: str = "ddcsieve.services.transition.FrequencyEstimator"


_pinned: ContextVar[DDCSieveSettings | None] = ContextVar("ddcsieve_pinned_settings", default=None)


def get_ddcsieve_settings() -> DDCSieveSettings:
    """Load settings from Django settings (defaults when Django is not configured)."""
    pinned_settings = _pinned.get()
    if pinned_settings is not None:
        return pinned_settings
    if not settings.configured:
        return DDCSieveSettings()
    user_settings: dict[str, Any] = getattr(settings, "DDCSIEVE", {})
    return DDCSieveSettings(**user_settings)


def settings_snapshot() -> dict[str, Any]:
    """Resolved settings as a plain dict, for output metadata."""
    return asdict(get_ddcsieve_settings())


class _LazySettings:
    """Lazy proxy that re-reads settings on every attribute access."""

    def __getattr__(self, name):
        return getattr(get_ddcsieve_settings(), name)


ddcsieve_settings = _LazySettings()


@contextmanager
def pinned(resolved: DDCSieveSettings | None):
    """
    Serve `resolved` as the settings inside the block.

    joblib process workers do not see the parent's Django overrides; work
    dispatched to them carries the parent's resolved settings and runs
    under this context. None leaves the settings untouched.
    """
    if resolved is None:
        yield
        return
    token = _pinned.set(resolved)
    try:
        yield
    finally:
        _pinned.reset(token)


def resolve_n_jobs(n_jobs: int | None = None) -> int:
    """joblib worker count; None reads N_JOBS, 0 means all cores."""
    n_jobs = ddcsieve_settings.N_JOBS if n_jobs is None else n_jobs
    return -1 if n_jobs == 0 else n_jobs


@contextmanager
def overrides(**values: Any):
    """
    Temporarily override DDCSIEVE keys for a configured project.

    Used by the CLI to apply RunConfig solver values and --threads.
    """
    if not values:
        yield
        return
    from django.test.utils import override_settings

    merged = {**getattr(settings, "DDCSIEVE", {}), **values}
    with override_settings(DDCSIEVE=merged):
        yield
