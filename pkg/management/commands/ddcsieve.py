"""Management command: solve, simulate, estimate, montecarlo, rank, ident-check, validate."""

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from ddcsieve.conf import overrides, settings_snapshot
from ddcsieve.domain.model import PayoffParams
from ddcsieve.domain.panel import MixtureComponent, MixtureSpec, PointMass
from ddcsieve.exceptions import DDCError
from ddcsieve.services import (
    config as run_config,
    identification,
    io,
    mixture,
    montecarlo,
    population,
    rank,
    simulator,
    solver,
)
from ddcsieve.services.transition import get_transition_estimator

logger = logging.getLogger("ddcsieve")

SUBCOMMANDS = ("solve", "simulate", "estimate", "montecarlo", "rank", "ident-check", "validate")


class Command(BaseCommand):
    help = "Solve, simulate and estimate DDC models with continuous unobserved heterogeneity"

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", required=True)
        for name in SUBCOMMANDS:
            sub = subparsers.add_parser(name)
            sub.add_argument("--config", default=None, help="RunConfig JSON (defaults when omitted)")
            sub.add_argument("--seed", type=int, default=None, help="Override the config seed")
            sub.add_argument("--out", default=".", help="Output directory")
            sub.add_argument("--threads", type=int, default=None, help="joblib workers (0 = all cores)")
            if name in ("estimate", "rank"):
                sub.add_argument("--panel", default=None, help="Panel CSV instead of simulating one")
            if name == "montecarlo":
                sub.add_argument(
                    "--full-scale",
                    action="store_true",
                    help="Run 1000 replications per sample size",
                )

    def handle(self, *args, **options):
        verbosity = options.get("verbosity", 1)
        logger.setLevel(logging.DEBUG if verbosity >= 3 else logging.INFO if verbosity >= 2 else logging.WARNING)

        try:
            cfg = run_config.load(options["config"], seed=options["seed"])
            if cfg.violations and options["subcommand"] != "validate":
                raise DDCError("CONFIG_INVALID", "Model invariants violated", violations=[str(v) for v in cfg.violations])
            out = Path(options["out"])
            out.mkdir(parents=True, exist_ok=True)
            values = dict(cfg.solver_settings)
            if options["threads"] is not None:
                values["N_JOBS"] = options["threads"]
            with overrides(**values):
                handler = getattr(self, "_" + options["subcommand"].replace("-", "_"))
                written = handler(cfg, out, options)
        except DDCError as exc:
            raise CommandError(str(exc), returncode=2 if exc.is_numeric else 1) from exc

        for path in written:
            self.stdout.write(f"  {path}")
        self.stdout.write(self.style.SUCCESS(f"{options['subcommand']}: wrote {len(written)} file(s) to {out}"))

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    def _metadata(self, cfg, command: str) -> dict:
        from ddcsieve import __version__

        resolved = settings_snapshot()
        resolved.pop("N_JOBS")
        return {"command": command, "version": __version__, "config": cfg.resolved, "settings": resolved}

    def _panel(self, cfg, options, mix: MixtureSpec | None = None):
        """Panel from --panel, else simulated from the config DGP."""
        if options.get("panel"):
            return io.read_panel(Path(options["panel"]), cfg.grid, cfg.model.num_actions), None
        types_seed, panel_seed = np.random.SeedSequence([cfg.seed]).generate_state(2)
        betas = simulator.draw_types(mix or cfg.mixture, cfg.simulation.n, int(types_seed))
        panel = simulator.simulate_panel(
            cfg.model,
            cfg.gamma,
            cfg.kernel,
            betas,
            cfg.simulation.periods,
            cfg.simulation.init_dist,
            int(panel_seed),
        )
        return panel, betas

    # ------------------------------------------------------------------
    # subcommands
    # ------------------------------------------------------------------

    def _solve(self, cfg, out: Path, options) -> list[Path]:
        params = PayoffParams(cfg.gamma, cfg.solve_beta)
        if cfg.model.horizon.is_infinite:
            vf = solver.solve_infinite(cfg.model, params, cfg.kernel)
            tables = [solver.ccp(cfg.model, params, cfg.kernel, vf).probs]
        else:
            T = cfg.model.horizon.periods
            vf = solver.solve_finite(cfg.model, [params] * T, [cfg.kernel] * T, T)
            tables = [t.probs for t in solver.ccp_finite(cfg.model, [params] * T, [cfg.kernel] * T, vf)]
        return [
            io.write_value_function(vf, cfg.grid, out / "value_function.csv"),
            io.write_ccps(tables, cfg.grid, out / "ccp.csv", finite=not cfg.model.horizon.is_infinite),
            io.write_json(
                {"iterations": vf.iterations, "residual": vf.residual, "metadata": self._metadata(cfg, "solve")},
                out / "solve.json",
            ),
        ]

    def _simulate(self, cfg, out: Path, options) -> list[Path]:
        panel, betas = self._panel(cfg, options)
        types = {f"b{k + 1}": betas[:, k] for k in range(betas.shape[1])}
        return [
            io.write_panel(panel, out / "panel.csv"),
            io.write_json({"betas": types, "metadata": self._metadata(cfg, "simulate")}, out / "types.json"),
        ]

    def _estimate(self, cfg, out: Path, options) -> list[Path]:
        est = cfg.estimator
        panel, _ = self._panel(cfg, options)
        kernel_est = get_transition_estimator(est.transition_method, est.bandwidths).estimate(panel)
        result = mixture.estimate(
            cfg.model,
            panel,
            kernel_est,
            est.grid,
            est.search,
            inner_tol=est.inner_tol,
            inner_max_iter=est.inner_max_iter,
            active_threshold=est.active_threshold,
        )
        payload = io.estimate_payload(result)
        payload["transition"] = {
            "method": kernel_est.method,
            "bandwidths": kernel_est.bandwidths,
            "empty_cells": kernel_est.empty_cells,
        }
        payload["metadata"] = self._metadata(cfg, "estimate")
        written = [
            io.write_json(payload, out / "estimate.json"),
            io.write_kernel(kernel_est.kernel, out / "kernel.csv"),
            io.write_json({"elapsed_seconds": result.diagnostics.elapsed_seconds}, out / "timing.json"),
        ]
        if result.sieve.grid.shape[1] == 1:
            written.append(io.write_cdf(mixture.estimated_cdf(result.sieve), out / "cdf.csv"))
        return written

    def _montecarlo(self, cfg, out: Path, options) -> list[Path]:
        mc = cfg.montecarlo
        if options.get("full_scale"):
            mc = replace(mc, replications=1000)
        summary = montecarlo.run(mc)
        payload = io.montecarlo_payload(summary)
        payload["metadata"] = self._metadata(cfg, "montecarlo")
        return [
            io.write_json(payload, out / "summary.json"),
            io.write_montecarlo_table(summary, out / "table.csv"),
            io.write_bands(summary, out / "bands.csv"),
            io.write_json(io.montecarlo_timing(summary), out / "timing.json"),
        ]

    def _rank(self, cfg, out: Path, options) -> list[Path]:
        rc = cfg.rank
        c = rc.conditioning
        if rc.mode == "population":
            stacks = population.type_stacks(cfg.model, cfg.gamma, cfg.kernel, rc.types.betas, 3)
            joint = population.population_joint(stacks, rc.types.weights, cfg.kernel, c.x1)
            M = rank.build_ratio_matrix(joint, cfg.kernel, c)
        else:
            types = MixtureSpec(
                tuple(
                    MixtureComponent(float(w), PointMass(tuple(b)))
                    for b, w in zip(rc.types.betas, rc.types.weights, strict=True)
                )
            )
            panel, _ = self._panel(cfg, options, mix=types)
            estimator = get_transition_estimator(cfg.estimator.transition_method, cfg.estimator.bandwidths)
            kernel = estimator.estimate(panel)
            joint, counts = rank.sample_joint(panel, c.x1)
            M = rank.build_ratio_matrix(joint, kernel.kernel, c, counts=counts, min_count=rc.min_count)
        estimate = rank.estimate_rank(M, rel_threshold=rc.rel_threshold, abs_threshold=rc.abs_threshold)
        payload = {
            "mode": M.mode,
            "rank": estimate,
            "singular_values": rank.singular_values(M),
            "x2_states": M.x2_states,
            "x3_states": M.x3_states,
            "conditioning": c,
            "metadata": self._metadata(cfg, "rank"),
        }
        return [io.write_json(payload, out / "rank.json")]

    def _ident_check(self, cfg, out: Path, options) -> list[Path]:
        lab = cfg.identification
        bundle = identification.build_operators(
            cfg.model, cfg.gamma, cfg.kernel, lab.types.betas, lab.types.weights, lab.conditioning
        )
        injectivity = identification.injectivity_diagnostic(bundle)
        report = {
            "residual_342": bundle.residual_342,
            "residual_32": bundle.residual_32,
            "singular_values": {
                "L_3b": np.linalg.svd(bundle.L_3b, compute_uv=False),
                "L_b2_adjoint": np.linalg.svd(bundle.L_b2.T, compute_uv=False),
                "L_32": np.linalg.svd(bundle.L_32, compute_uv=False),
            },
            "injectivity": {**io.to_jsonable(injectivity), "injective": injectivity.injective},
            "true_eigenvalues": np.diag(bundle.D4),
            "conditioning": lab.conditioning,
            "metadata": self._metadata(cfg, "ident-check"),
        }
        path = out / "ident.json"
        try:
            recovery = identification.spectral_recover(bundle)
            report["spectral"] = {
                "eigenvalues": recovery.eigenvalues,
                "matching": recovery.matching,
                "eigenvalue_gap": recovery.eigenvalue_gap,
                "eigenvalue_error": recovery.eigenvalue_error,
                "ccp_error": recovery.ccp_error,
                "normalization_error": recovery.normalization_error,
            }
            if bundle.stationary:
                weights = identification.recover_type_weights(bundle, recovery)
                report["weights"] = {"recovered": weights.weights, "error": weights.weight_error}
        except DDCError as exc:
            report["error"] = exc.as_dict()
            io.write_json(report, path)
            raise
        return [io.write_json(report, path)]

    def _validate(self, cfg, out: Path, options) -> list[Path]:
        payload = {
            "valid": not cfg.violations,
            "violations": [v.as_dict() for v in cfg.violations],
            "grid_states": cfg.grid.size,
            "gamma_size": cfg.model.gamma_size,
            "metadata": self._metadata(cfg, "validate"),
        }
        path = io.write_json(payload, out / "validate.json")
        if cfg.violations:
            raise DDCError("CONFIG_INVALID", "Model invariants violated", violations=[str(v) for v in cfg.violations])
        return [path]
