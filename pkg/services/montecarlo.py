"""Monte Carlo harness - repeated simulate / estimate / score over sample sizes.

Every replication draws its streams from SeedSequence([seed, n, m]), so the
summary is the same for any execution order or worker count.
"""

import logging
import time

import numpy as np
from joblib import Parallel, delayed

from ddcsieve.conf import DDCSieveSettings, get_ddcsieve_settings, pinned, resolve_n_jobs
from ddcsieve.domain.montecarlo import (
    CdfBands,
    GammaStats,
    McConfig,
    McSummary,
    ReplicationRecord,
    SampleSizeSummary,
)
from ddcsieve.exceptions import DDCError
from ddcsieve.services import mixture, simulator
from ddcsieve.services.transition import get_transition_estimator
from ddcsieve.signals import replication_completed

logger = logging.getLogger(__name__)

BAND_QUANTILES = (0.5, 0.025, 0.975)


def replication_seeds(seed: int, n: int, m: int) -> tuple[int, int]:
    """(type-draw seed, panel seed) of replication m at sample size n."""
    types_seed, panel_seed = np.random.SeedSequence([seed, n, m]).generate_state(2)
    return int(types_seed), int(panel_seed)


def _check_config(config: McConfig) -> None:
    if config.replications < 1:
        raise DDCError("CONFIG_INVALID", "Need at least one replication", path="montecarlo.replications")
    small = [n for n in config.sample_sizes if n < 10]
    if small or not config.sample_sizes:
        raise DDCError("CONFIG_INVALID", "Sample sizes must be at least 10", path="montecarlo.sample_sizes")


def _band_points(config: McConfig) -> np.ndarray:
    lo, hi = config.estimator.grid.beta_support[0]
    return np.linspace(lo, hi, config.band_points)


def run_replication(
    config: McConfig, n: int, m: int, resolved: DDCSieveSettings | None = None
) -> tuple[ReplicationRecord, np.ndarray | None]:
    """
    One simulate -> transition -> mixture -> metrics pass.

    Errors from the library are captured in the record instead of raised.
    `resolved` pins the caller's settings for the pass (worker processes
    would otherwise read the defaults).
    """
    with pinned(resolved):
        return _replicate(config, n, m)


def _replicate(config: McConfig, n: int, m: int) -> tuple[ReplicationRecord, np.ndarray | None]:
    dgp, est = config.dgp, config.estimator
    started = time.perf_counter()
    types_seed, panel_seed = replication_seeds(config.seed, n, m)
    try:
        betas = simulator.draw_types(dgp.mixture, n, types_seed)
        panel = simulator.simulate_panel(
            dgp.model, dgp.gamma, dgp.kernel, betas, dgp.periods, dgp.init_dist, panel_seed, n_jobs=1
        )
        kernel_est = get_transition_estimator(est.transition_method, est.bandwidths).estimate(panel)
        result = mixture.estimate(
            dgp.model,
            panel,
            kernel_est,
            est.grid,
            est.search,
            inner_tol=est.inner_tol,
            inner_max_iter=est.inner_max_iter,
            active_threshold=est.active_threshold,
            n_jobs=1,
        )
        cdf = mixture.estimated_cdf(result.sieve)
        iae, ise = mixture.error_metrics(cdf, dgp.mixture)
    except DDCError as exc:
        record = ReplicationRecord(n, m, seconds=time.perf_counter() - started, error=exc.as_dict())
        return record, None

    record = ReplicationRecord(
        n=n,
        replication=m,
        gamma_hat=tuple(map(float, result.gamma_hat)),
        iae=iae,
        ise=ise,
        active_types=result.active_types,
        loglik=result.loglik,
        seconds=time.perf_counter() - started,
    )
    return record, cdf(_band_points(config))


def gamma_stats(estimates: np.ndarray, truth: np.ndarray, n: int) -> GammaStats:
    """Bias, variance (ddof=0) and MSE per coordinate, raw and scaled by sqrt(n)."""
    if estimates.size == 0:
        empty = tuple(float("nan") for _ in truth)
        return GammaStats(empty, empty, empty, empty, empty, empty)
    bias = estimates.mean(axis=0) - truth
    variance = estimates.var(axis=0)
    mse = ((estimates - truth) ** 2).mean(axis=0)

    def as_tuple(values):
        return tuple(map(float, values))

    return GammaStats(
        bias=as_tuple(bias),
        variance=as_tuple(variance),
        mse=as_tuple(mse),
        scaled_bias=as_tuple(np.sqrt(n) * bias),
        scaled_variance=as_tuple(n * variance),
        scaled_mse=as_tuple(n * mse),
    )


def _summarize(config: McConfig, n: int, outcomes) -> SampleSizeSummary:
    records = [r for r, _ in outcomes]
    ok = [(r, c) for r, c in outcomes if r.ok]
    failures = len(records) - len(ok)
    if failures:
        logger.warning("montecarlo: n=%d excluded %d failed replication(s)", n, failures)
    truth = np.asarray(config.dgp.gamma, dtype=float)
    estimates = np.array([r.gamma_hat for r, _ in ok], dtype=float).reshape(len(ok), truth.size)
    iae = np.array([r.iae for r, _ in ok])
    ise = np.array([r.ise for r, _ in ok])
    types = np.array([r.active_types for r, _ in ok])

    bands = None
    if ok:
        points = _band_points(config)
        curves = np.vstack([c for _, c in ok])
        median, lower, upper = np.quantile(curves, BAND_QUANTILES, axis=0)
        bands = CdfBands(points, median, lower, upper, config.dgp.mixture.cdf(points))

    def stat(values, fn):
        return float(fn(values)) if values.size else float("nan")

    grid = config.estimator.grid
    return SampleSizeSummary(
        n=n,
        replications=len(records),
        failures=failures,
        grid_points=grid.size or mixture.grid_rule(n),
        gamma=gamma_stats(estimates, truth, n),
        mise=stat(ise, np.mean),
        iae_mean=stat(iae, np.mean),
        iae_min=stat(iae, np.min),
        iae_max=stat(iae, np.max),
        types_mean=stat(types, np.mean),
        types_min=int(types.min()) if types.size else 0,
        types_max=int(types.max()) if types.size else 0,
        median_seconds=float(np.median([r.seconds for r in records])),
        bands=bands,
    )


def run(config: McConfig, n_jobs: int | None = None) -> McSummary:
    """
    All replications for every sample size, aggregated per n.

    Failed replications are excluded from the statistics and counted.
    """
    _check_config(config)
    jobs = [(n, m) for n in config.sample_sizes for m in range(config.replications)]
    logger.info("montecarlo: %d replications over n=%s", len(jobs), list(config.sample_sizes))
    resolved = get_ddcsieve_settings()
    outcomes = Parallel(n_jobs=resolve_n_jobs(n_jobs))(
        delayed(run_replication)(config, n, m, resolved) for n, m in jobs
    )

    for record, _ in outcomes:
        replication_completed.send(sender=ReplicationRecord, record=record)

    per_n = []
    for n in config.sample_sizes:
        subset = [o for o in outcomes if o[0].n == n]
        summary = _summarize(config, n, subset)
        logger.info(
            "montecarlo: n=%d MISE=%.5f IAE=%.5f failures=%d",
            n,
            summary.mise,
            summary.iae_mean,
            summary.failures,
        )
        per_n.append(summary)
    return McSummary(per_n=tuple(per_n), records=tuple(r for r, _ in outcomes))
