"""End-to-end tests of the command-line interface."""

import json
import math

import numpy as np
import pytest

from evtkrig import cli, kriging as kg


@pytest.fixture(scope="module")
def exp_losses_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "losses.csv"
    rng = np.random.default_rng(0)
    vals = rng.exponential(size=100_000)
    path.write_text("loss\n" + "\n".join(format(v, ".17g") for v in vals) + "\n")
    return path


def run_cli(*args):
    return cli.main([str(a) for a in args])


class TestFitGpd:
    def test_exponential_report(self, exp_losses_csv, tmp_path, capsys):
        out = tmp_path / "report.json"
        rc = run_cli("fit-gpd", "--input", exp_losses_csv, "--out", out)
        assert rc == 0
        report = json.loads(out.read_text())
        assert abs(report["xi"]) < 0.05
        assert report["n_exceed"] == 10_000
        assert len(report["info"]) == 2
        assert report["loglik"] < 0

    def test_empty_file(self, tmp_path, capsys):
        p = tmp_path / "empty.csv"
        p.write_text("")
        assert run_cli("fit-gpd", "--input", p) == 1

    def test_constant_column(self, tmp_path, capsys):
        p = tmp_path / "const.csv"
        p.write_text("loss\n" + "\n".join(["7.5"] * 500) + "\n")
        assert run_cli("fit-gpd", "--input", p) == 2

    def test_missing_file(self, tmp_path, capsys):
        assert run_cli("fit-gpd", "--input", tmp_path / "nope.csv") == 1


class TestEstimate:
    def test_empirical_enumeration(self, tmp_path, capsys):
        p = tmp_path / "ten.csv"
        p.write_text("loss\n" + "\n".join(str(float(i)) for i in range(1, 11)) + "\n")
        rc = run_cli("estimate", "--input", p, "--alpha", "0.8")
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["value"] == pytest.approx(9.0)
        assert payload["method"] == "empirical"

    def test_pot_exponential(self, exp_losses_csv, capsys):
        rc = run_cli("estimate", "--input", exp_losses_csv, "--alpha", "0.95",
                     "--method", "pot")
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["value"] == pytest.approx(math.log(20) + 1, rel=2e-2)
        assert payload["variance"] > 0
        assert "gpd" in payload

    def test_spectral_matches_pot(self, exp_losses_csv, capsys):
        rc = run_cli("estimate", "--input", exp_losses_csv, "--alpha", "0.95",
                     "--method", "spectral")
        assert rc == 0
        spectral = json.loads(capsys.readouterr().out)
        rc = run_cli("estimate", "--input", exp_losses_csv, "--alpha", "0.95",
                     "--method", "pot")
        pot = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert spectral["value"] == pytest.approx(pot["value"], rel=1e-6)

    def test_alpha_out_of_range(self, exp_losses_csv, capsys):
        assert run_cli("estimate", "--input", exp_losses_csv, "--alpha", "1.5") == 1


class TestDesign:
    def test_lhs_quartiles(self, capsys):
        rc = run_cli("design", "--kind", "lhs", "--lower", "0", "--upper", "1",
                     "--count", "4", "--seed", "3")
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "x1"
        vals = sorted(float(v) for v in lines[1:])
        assert [int(v * 4) for v in vals] == [0, 1, 2, 3]

    def test_grid(self, capsys):
        rc = run_cli("design", "--kind", "grid", "--lower", "0.3", "--upper", "2",
                     "--count", "7")
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        vals = [float(v) for v in lines[1:]]
        assert vals[0] == 0.3 and vals[-1] == 2.0
        assert np.allclose(np.diff(vals), 1.7 / 6)

    def test_bad_bounds(self, capsys):
        assert run_cli("design", "--lower", "0,0", "--upper", "1", "--count", "3") == 1


class TestPredict:
    @pytest.fixture()
    def model_file(self, tmp_path):
        sites = [kg.DesignSite((0.0,), 1.0), kg.DesignSite((1.0,), 3.0),
                 kg.DesignSite((2.0,), 2.0)]
        model = kg.assemble(sites, tau2=2.0, theta=[1.0])
        p = tmp_path / "model.json"
        p.write_text(model.to_json())
        return p, model

    def test_sites_reproduced(self, model_file, tmp_path, capsys):
        p, model = model_file
        pts = tmp_path / "pts.csv"
        pts.write_text("x1\n0.0\n1.0\n2.0\n")
        rc = run_cli("predict", "--model", p, "--points", pts)
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "x1,mean,extrinsic_sd"
        means = [float(line.split(",")[1]) for line in lines[1:]]
        assert means == pytest.approx([1.0, 3.0, 2.0], abs=1e-9)

    def test_far_point_regresses_to_trend(self, model_file, tmp_path, capsys):
        p, model = model_file
        pts = tmp_path / "far.csv"
        pts.write_text("x1\n50.0\n")
        rc = run_cli("predict", "--model", p, "--points", pts)
        assert rc == 0
        line = capsys.readouterr().out.strip().splitlines()[1]
        assert float(line.split(",")[1]) == pytest.approx(model.beta0, abs=1e-12)

    def test_two_site_closed_form(self, tmp_path, capsys):
        tau2, theta = 2.0, 1.0
        sites = [kg.DesignSite((0.0,), 1.0, 0.3), kg.DesignSite((1.0,), 3.0, 0.7)]
        model = kg.assemble(sites, tau2=tau2, theta=[theta])
        mp = tmp_path / "m.json"
        mp.write_text(model.to_json())
        pts = tmp_path / "p.csv"
        pts.write_text("x1\n0.3\n")
        rc = run_cli("predict", "--model", mp, "--points", pts)
        assert rc == 0
        got = float(capsys.readouterr().out.strip().splitlines()[1].split(",")[1])
        r = math.exp(-theta)
        sigma = tau2 * np.array([[1, r], [r, 1]]) + np.diag([0.3, 0.7])
        inv = np.linalg.inv(sigma)
        ones, y = np.ones(2), np.array([1.0, 3.0])
        beta0 = (ones @ inv @ y) / (ones @ inv @ ones)
        v = tau2 * np.array([math.exp(-theta * 0.09), math.exp(-theta * 0.49)])
        assert got == pytest.approx(beta0 + v @ inv @ (y - beta0), abs=1e-12)

    def test_dimension_mismatch(self, model_file, tmp_path, capsys):
        p, _ = model_file
        pts = tmp_path / "bad.csv"
        pts.write_text("x1,x2\n0.0,1.0\n")
        assert run_cli("predict", "--model", p, "--points", pts) == 1


class TestRun:
    @staticmethod
    def write_config(path, **overrides):
        cfg = {"version": 1, "scenarios": ["san"], "san_budgets": [1000],
               "alphas": [0.99], "macro_replications": 1, "seed": 5,
               "methods": ["POT-EVT", "EMP-EMP"]}
        cfg.update(overrides)
        path.write_text(json.dumps(cfg))
        return path

    def test_outputs_written(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "cfg.json")
        out = tmp_path / "results"
        rc = run_cli("run", "--config", cfg, "--out-dir", out)
        assert rc == 0
        for name in ("results.csv", "summary.csv", "boxplot.csv"):
            assert (out / name).exists()
        rows = (out / "results.csv").read_text().splitlines()
        assert len(rows) == 3  # header + 2 methods x 1 alpha x 1 macro-rep
        summary = (out / "summary.csv").read_text().splitlines()
        assert summary[0] == "scenario,allocation,method,median_mape_0.99"

    def test_fixed_seed_byte_identical(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "cfg.json")
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", cfg, "--out-dir", a) == 0
        assert run_cli("run", "--config", cfg, "--out-dir", b) == 0
        for name in ("results.csv", "summary.csv", "boxplot.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_flag_overrides_config(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "cfg.json")
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", cfg, "--out-dir", a) == 0
        assert run_cli("run", "--config", cfg, "--out-dir", b, "--seed", "99") == 0
        assert (a / "results.csv").read_text() != (b / "results.csv").read_text()

    def test_invalid_env_var_is_validation_error(self, tmp_path, capsys, monkeypatch):
        cfg = self.write_config(tmp_path / "cfg.json")
        monkeypatch.setenv("EVTKRIG_SEED", "banana")
        assert run_cli("run", "--config", cfg, "--out-dir", tmp_path / "x") == 1
        assert "EVTKRIG_SEED" in capsys.readouterr().err

    def test_env_seed_override(self, tmp_path, capsys, monkeypatch):
        cfg = self.write_config(tmp_path / "cfg.json")
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", cfg, "--out-dir", b, "--seed", "99") == 0
        monkeypatch.setenv("EVTKRIG_SEED", "99")
        assert run_cli("run", "--config", cfg, "--out-dir", a) == 0
        assert (a / "results.csv").read_text() == (b / "results.csv").read_text()

    def test_unknown_allocation_id(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "cfg.json", scenarios=["pareto"],
                                san_budgets=None, allocations=[16])
        cfg_data = json.loads(cfg.read_text())
        del cfg_data["san_budgets"]
        cfg.write_text(json.dumps(cfg_data))
        rc = run_cli("run", "--config", cfg, "--out-dir", tmp_path / "x")
        assert rc == 1

    def test_schema_violations_listed_exhaustively(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"version": 3, "scenarios": ["mars"],
                                 "macro_replications": 0, "typo_key": 1}))
        rc = run_cli("run", "--config", p, "--out-dir", tmp_path / "x")
        assert rc == 1
        err = capsys.readouterr().err
        for needle in ("typo_key", "version", "scenarios", "macro_replications"):
            assert needle in err

    def test_threads_give_identical_output(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "cfg.json", macro_replications=2)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", cfg, "--out-dir", a) == 0
        assert run_cli("run", "--config", cfg, "--out-dir", b, "--threads", "2") == 0
        for name in ("results.csv", "summary.csv", "boxplot.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_shipped_configs_validate(self):
        import pathlib

        config_dir = pathlib.Path(__file__).resolve().parents[1] / "configs"
        names = {p.name for p in config_dir.glob("*.json")}
        assert {"benchmark-1e5.json", "benchmark-1e6.json", "benchmark-1e7.json",
                "san.json", "smoke.json"} <= names
        for p in config_dir.glob("*.json"):
            parsed = cli._load_config(str(p))
            assert parsed["scenarios"]
        grid = cli._load_config(str(config_dir / "benchmark-1e5.json"))
        assert grid["allocations"] == [1, 2, 3, 4, 5]
        assert len(grid["scenarios"]) == 3 and len(grid["alphas"]) == 3
