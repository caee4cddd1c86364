"""Tests for the ddcsieve command line."""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy import special

from ddcsieve.cli import main
from ddcsieve.services import config as run_config
from ddcsieve.services import io, population, rank

CONFIGS = Path(__file__).resolve().parent.parent / "docs" / "configs"

SMALL_ESTIMATE = {
    "simulation": {"n": 60, "periods": 3},
    "estimator": {"grid_size": 5, "max_evals": 4},
}


def write_config(tmp_path: Path, document: dict) -> str:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(document))
    return str(path)


class TestValidate:
    def test_defaults(self, tmp_path):
        assert main(["validate", "--out", str(tmp_path)]) == 0
        report = io.read_json(tmp_path / "validate.json")
        assert report["valid"] is True
        assert report["grid_states"] == 15
        assert "N_JOBS" not in report["metadata"]["settings"]

    def test_default_sample_sizes(self):
        """The default study runs n = 100, 500, 1000."""
        assert run_config.load(None).montecarlo.sample_sizes == (100, 500, 1000)

    @pytest.mark.parametrize("name", ["baseline_dgp.json", "three_types.json"])
    def test_shipped_configs(self, tmp_path, name):
        assert main(["validate", "--config", str(CONFIGS / name), "--out", str(tmp_path)]) == 0

    def test_unknown_key(self, tmp_path):
        config = write_config(tmp_path, {"estimator": {"grid_sise": 5}})
        assert main(["validate", "--config", config, "--out", str(tmp_path)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 1

    def test_invariant_violations_reported(self, tmp_path):
        """A kernel whose rows do not sum to one is listed, then rejected."""
        (tmp_path / "kernel.csv").write_text("a,from,to,prob\n0,0,0,0.5\n0,1,1,1\n1,0,0,1\n1,1,1,1\n")
        config = write_config(
            tmp_path,
            {
                "grid": {"axes": None, "points": [[0.0, 0.0], [1.0, 0.0]]},
                "kernel": {"type": "csv", "path": "kernel.csv"},
                "identification": {"x4": 0},
            },
        )
        assert main(["validate", "--config", config, "--out", str(tmp_path)]) == 1
        report = io.read_json(tmp_path / "validate.json")
        assert report["valid"] is False
        assert report["violations"]
        assert main(["solve", "--config", config, "--out", str(tmp_path)]) == 1


class TestSolve:
    def test_static_logit(self, tmp_path):
        """With rho = 0 the CCP of action 1 is the logistic of its payoff."""
        config = write_config(tmp_path, {"model": {"discount": 0.0}})
        assert main(["solve", "--config", config, "--out", str(tmp_path)]) == 0
        ccp = pd.read_csv(tmp_path / "ccp.csv")
        inside = ccp[ccp["a"] == 1]
        expected = special.expit(2.5 * inside["x1"] + 0.5 * inside["x2"])
        np.testing.assert_allclose(inside["prob"], expected, atol=1e-12)
        assert io.read_json(tmp_path / "solve.json")["iterations"] == 1
        assert len(pd.read_csv(tmp_path / "value_function.csv")) == 15

    def test_finite_horizon(self, tmp_path):
        config = write_config(tmp_path, {"model": {"horizon": 3}})
        assert main(["solve", "--config", config, "--out", str(tmp_path)]) == 0
        ccp = pd.read_csv(tmp_path / "ccp.csv")
        assert sorted(ccp["t"].unique()) == [1, 2, 3]


class TestSimulate:
    def test_byte_identical(self, tmp_path):
        """Same seed, same bytes."""
        config = write_config(tmp_path, {"simulation": {"n": 40, "periods": 3}})
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["simulate", "--config", config, "--seed", "5", "--out", str(first)]) == 0
        assert main(["simulate", "--config", config, "--seed", "5", "--out", str(second), "--threads", "2"]) == 0
        for name in ("panel.csv", "types.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_seed_changes_panel(self, tmp_path):
        config = write_config(tmp_path, {"simulation": {"n": 40, "periods": 3}})
        main(["simulate", "--config", config, "--seed", "5", "--out", str(tmp_path / "a")])
        main(["simulate", "--config", config, "--seed", "6", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "panel.csv").read_bytes() != (tmp_path / "b" / "panel.csv").read_bytes()

    def test_panel_reads_back(self, tmp_path):
        config = write_config(tmp_path, {"simulation": {"n": 40, "periods": 3}})
        main(["simulate", "--config", config, "--out", str(tmp_path)])
        cfg = run_config.load(config)
        panel = io.read_panel(tmp_path / "panel.csv", cfg.grid, 2)
        assert panel.states.shape == (40, 3)


class TestEstimate:
    def test_outputs(self, tmp_path):
        config = write_config(tmp_path, SMALL_ESTIMATE)
        assert main(["estimate", "--config", config, "--out", str(tmp_path)]) == 0
        for name in ("estimate.json", "kernel.csv", "timing.json", "cdf.csv"):
            assert (tmp_path / name).exists()
        result = io.read_json(tmp_path / "estimate.json")
        assert len(result["weights"]) == 5
        assert sum(result["marginal_weights"]) == pytest.approx(1.0)
        assert -2.0 <= result["gamma_hat"][0] <= 3.0
        assert result["transition"]["method"] == "frequency"

    def test_thread_count_does_not_change_results(self, tmp_path):
        config = write_config(tmp_path, SMALL_ESTIMATE)
        main(["estimate", "--config", config, "--out", str(tmp_path / "one"), "--threads", "1"])
        main(["estimate", "--config", config, "--out", str(tmp_path / "two"), "--threads", "2"])
        assert (tmp_path / "one" / "estimate.json").read_bytes() == (tmp_path / "two" / "estimate.json").read_bytes()

    def test_panel_file(self, tmp_path):
        """An ingested panel replaces the simulated one."""
        config = write_config(tmp_path, SMALL_ESTIMATE)
        main(["simulate", "--config", config, "--out", str(tmp_path / "sim")])
        args = ["estimate", "--config", config, "--panel", str(tmp_path / "sim" / "panel.csv")]
        assert main([*args, "--out", str(tmp_path / "from_file")]) == 0
        assert main(["estimate", "--config", config, "--out", str(tmp_path / "direct")]) == 0
        from_file = io.read_json(tmp_path / "from_file" / "estimate.json")
        direct = io.read_json(tmp_path / "direct" / "estimate.json")
        assert from_file["gamma_hat"] == direct["gamma_hat"]

    @pytest.mark.slow
    def test_baseline_design(self, tmp_path):
        """n = 500 from the three-component mixture lands near gamma = 0.5."""
        assert main(["estimate", "--out", str(tmp_path)]) == 0
        result = io.read_json(tmp_path / "estimate.json")
        assert abs(result["gamma_hat"][0] - 0.5) < 0.5


class TestRank:
    def test_population_rank_matches_library(self, tmp_path):
        assert main(["rank", "--out", str(tmp_path)]) == 0
        report = io.read_json(tmp_path / "rank.json")
        cfg = run_config.load(None)
        stacks = population.type_stacks(cfg.model, cfg.gamma, cfg.kernel, cfg.rank.types.betas, 3)
        joint = population.population_joint(stacks, cfg.rank.types.weights, cfg.kernel, cfg.rank.conditioning.x1)
        M = rank.build_ratio_matrix(joint, cfg.kernel, cfg.rank.conditioning)
        assert report["mode"] == "population"
        assert report["rank"] == rank.estimate_rank(M)
        assert list(report["x2_states"]) == list(M.x2_states)

    def test_sample_mode(self, tmp_path):
        """Diffuse transitions keep the empirical ratio matrix non-empty."""
        config = write_config(
            tmp_path,
            {
                "rank": {"mode": "sample", "min_count": 0},
                "simulation": {"n": 3000, "periods": 3},
                "kernel": {"innovation_sd": 3.0},
            },
        )
        assert main(["rank", "--config", config, "--out", str(tmp_path)]) == 0
        report = io.read_json(tmp_path / "rank.json")
        assert report["mode"] == "sample"
        assert report["rank"] >= 1


class TestIdentCheck:
    def test_default_types_recovered(self, tmp_path):
        assert main(["ident-check", "--out", str(tmp_path)]) == 0
        report = io.read_json(tmp_path / "ident.json")
        assert report["injectivity"]["injective"] is True
        assert report["spectral"]["eigenvalue_error"] < 1e-6
        assert report["weights"]["error"] < 1e-6
        assert report["residual_342"] < 1e-10

    def test_duplicate_types_exit_numeric(self, tmp_path):
        """Identical types are not injective: report written, exit code 2."""
        types = [{"beta": [2.5], "weight": 0.5}, {"beta": [2.5], "weight": 0.5}]
        config = write_config(tmp_path, {"identification": {"types": types}})
        assert main(["ident-check", "--config", config, "--out", str(tmp_path)]) == 2
        report = io.read_json(tmp_path / "ident.json")
        assert report["error"]["code"] == "NOT_INJECTIVE"


class TestMonteCarlo:
    def test_tiny_run(self, tmp_path):
        config = write_config(
            tmp_path,
            {
                "simulation": {"periods": 3},
                "estimator": {"grid_size": 4, "max_evals": 3},
                "montecarlo": {"sample_sizes": [30], "replications": 2, "band_points": 7},
            },
        )
        assert main(["montecarlo", "--config", config, "--out", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "table.csv", index_col="metric")
        assert list(table.columns) == ["30"]
        assert table.loc["replications", "30"] == 2
        assert len(pd.read_csv(tmp_path / "bands.csv")) == 7
        summary = io.read_json(tmp_path / "summary.json")
        assert all("seconds" not in r for r in summary["records"])
