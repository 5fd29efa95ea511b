import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from rmt_kit.cli import EXIT, config_hash, main, read_csv
from rmt_kit.ensembles import CoupledParams, sample_spectra
from rmt_kit.kernels import FiniteKernel, kernel_grid
from rmt_kit.limits import PerturbationSet, bessel_kernel_closed, kernel_III

COUPLED = {"kind": "coupled", "N": 2, "M": 3, "L": 3, "alpha": 1.0,
           "q": [1.0, 1.7, 2.6], "delta": [0.1, 0.9]}
WISHART = {"kind": "wishart", "N": 2, "M": 3, "q": [1.0, 1.5, 2.0], "sigma": [0.0, 0.5]}


def run(tmp_path, command, cfg, *flags, name="run.json"):
    path = tmp_path / name
    if isinstance(cfg, str):
        path.write_text(cfg)
    else:
        path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    return main([command, "--config", str(path), "--out", str(out), *flags]), out


class TestValidate:
    def test_valid(self, tmp_path, capsys):
        code, out = run(tmp_path, "validate", {"ensemble": COUPLED})
        assert code == EXIT["ok"]
        assert "constraints satisfied" in capsys.readouterr().out
        m = json.loads((out / "validate.json").read_text())
        assert m["status"] == "constraints satisfied" and m["kappa"] == 1 and m["nu"] == 1

    def test_violation_names_indices(self, tmp_path, capsys):
        bad = dict(COUPLED, delta=[0.1, 1.2])
        code, out = run(tmp_path, "validate", {"ensemble": bad})
        assert code == EXIT["validation"]
        err = capsys.readouterr().err
        assert "aqd" in err
        m = json.loads((out / "validate.json").read_text())
        assert m["status"] == "violated" and m["constraint"] == "aqd"
        assert m["violations"]

    def test_missing_field(self, tmp_path, capsys):
        cfg = {"ensemble": {k: v for k, v in COUPLED.items() if k != "q"}}
        code, _ = run(tmp_path, "validate", cfg)
        assert code == EXIT["config"]
        assert "config.ensemble: missing field 'q'" in capsys.readouterr().err

    def test_malformed_json_location(self, tmp_path, capsys):
        code, _ = run(tmp_path, "validate", '{"ensemble":\n  {"kind": }')
        assert code == EXIT["config"]
        assert "line 2 column" in capsys.readouterr().err

    def test_non_finite_rejected(self, tmp_path):
        code, _ = run(tmp_path, "validate", '{"ensemble": {"kind": "wishart", "N": 1, "M": 1, '
                                            '"q": [NaN], "sigma": [0]}}')
        assert code == EXIT["config"]

    def test_wrong_type(self, tmp_path, capsys):
        code, _ = run(tmp_path, "validate", {"ensemble": dict(COUPLED, N=2.5)})
        assert code == EXIT["config"]
        assert "config.ensemble.N" in capsys.readouterr().err

    def test_command_mismatch(self, tmp_path):
        code, _ = run(tmp_path, "validate", {"command": "scan", "ensemble": COUPLED})
        assert code == EXIT["config"]

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "nope.json")]) == EXIT["config"]

    def test_bad_arguments(self):
        assert main(["frobnicate"]) == EXIT["config"]


class TestKernel:
    def test_finite(self, tmp_path):
        xs, ys = [0.3, 1.2], [0.5, 2.0, 3.1]
        code, out = run(tmp_path, "kernel", {"ensemble": COUPLED, "method": "gram-sum",
                                             "x": xs, "y": ys})
        assert code == EXIT["ok"]
        cols, rows = read_csv(out / "kernel.csv")
        assert cols == ["x", "y", "K", "est_error", "status"]
        assert [(float(r[0]), float(r[1])) for r in rows] == [(x, y) for x in xs for y in ys]
        params = CoupledParams(**{k: v for k, v in COUPLED.items() if k != "kind"})
        ref = kernel_grid(FiniteKernel("coupled", params, "gram-sum"), xs, ys).values
        np.testing.assert_array_equal(np.array([float(r[2]) for r in rows]), ref.ravel())

    def test_limit_III(self, tmp_path):
        cfg = {"limit": {"kernel": "III", "nu": 1,
                         "perturbations": {"pi_hat": [0.5], "theta_hat": [-0.3]}},
               "x": [1.0], "y": [2.0]}
        code, out = run(tmp_path, "kernel", cfg)
        assert code == EXIT["ok"]
        _, rows = read_csv(out / "kernel.csv")
        assert float(rows[0][2]) == kernel_III(PerturbationSet([0.5], [-0.3]), 1, 1.0, 2.0)

    def test_limit_bessel(self, tmp_path):
        code, out = run(tmp_path, "kernel", {"limit": {"kernel": "bessel"}, "x": [1.0, 3.0],
                                             "y": [2.0]})
        assert code == EXIT["ok"]
        _, rows = read_csv(out / "kernel.csv")
        assert float(rows[1][2]) == bessel_kernel_closed(0, 3.0, 2.0)

    def test_header_names_units_and_gauge(self, tmp_path):
        _, out = run(tmp_path, "kernel", {"limit": {"kernel": "bessel"}, "x": [1.0], "y": [2.0]})
        head = (out / "kernel.csv").read_text().splitlines()[:2]
        assert head[0].startswith("# units:") and head[1].startswith("# gauge:")

    def test_failed_cells_flagged(self, tmp_path):
        cfg = {"limit": {"kernel": "II", "tau": 1.0, "perturbations": {"pi_hat": [0.85]}},
               "x": [1.0, 2.0], "y": [1.0]}
        code, out = run(tmp_path, "kernel", cfg)
        assert code == EXIT["convergence"]
        _, rows = read_csv(out / "kernel.csv")
        assert len(rows) == 2 and all(r[4].startswith("GeometryError") for r in rows)

    def test_inadmissible_limit(self, tmp_path):
        cfg = {"limit": {"kernel": "I", "perturbations": {"theta_hat": [0.3]}},
               "x": [1.0], "y": [1.0]}
        assert run(tmp_path, "kernel", cfg)[0] == EXIT["validation"]


class TestSample:
    CFG = {"ensemble": COUPLED, "count": 400, "seed": 42}

    def test_reproducible(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir()
        b.mkdir()
        assert run(a, "sample", self.CFG)[0] == EXIT["ok"]
        assert run(b, "sample", self.CFG, "--threads", "3")[0] == EXIT["ok"]
        assert (a / "out" / "sample.csv").read_bytes() == (b / "out" / "sample.csv").read_bytes()

    def test_rows_and_round_trip(self, tmp_path):
        code, out = run(tmp_path, "sample", self.CFG)
        assert code == EXIT["ok"]
        cols, rows = read_csv(out / "sample.csv")
        assert cols == ["x1", "x2"] and len(rows) == 400
        got = np.array([[float(v) for v in r] for r in rows])
        params = CoupledParams(**{k: v for k, v in COUPLED.items() if k != "kind"})
        np.testing.assert_array_equal(got, sample_spectra(params, 400, 42))

    def test_manifest(self, tmp_path):
        _, out = run(tmp_path, "sample", self.CFG)
        m = json.loads((out / "sample.json").read_text())
        assert m["kappa"] == 1 and m["nu"] == 1 and m["seed"] == 42
        assert m["config_sha256"] == config_hash(self.CFG)
        assert m["version"] and m["tool"] == "rmt-kit"

    def test_smallest_value_stable_across_seeds(self, tmp_path):
        means, var = [], []
        for seed in (1, 2):
            d = tmp_path / str(seed)
            d.mkdir()
            run(d, "sample", dict(self.CFG, count=3000, seed=seed))
            _, rows = read_csv(d / "out" / "sample.csv")
            s = np.array([float(r[0]) for r in rows])
            means.append(s.mean())
            var.append(s.var(ddof=1) / s.size)
        assert abs(means[0] - means[1]) < 5 * math.sqrt(sum(var))

    def test_invalid_params(self, tmp_path):
        cfg = dict(self.CFG, ensemble=dict(COUPLED, delta=[0.1, 1.2]))
        assert run(tmp_path, "sample", cfg)[0] == EXIT["validation"]

    def test_missing_seed(self, tmp_path):
        assert run(tmp_path, "sample", {"ensemble": COUPLED, "count": 3})[0] == EXIT["config"]


class TestDensity:
    def test_trace(self, tmp_path):
        cfg = {"ensemble": WISHART, "t": {"min": 0.02, "max": 30.0, "points": 1500}}
        code, out = run(tmp_path, "density", cfg)
        assert code == EXIT["ok"]
        cols, rows = read_csv(out / "density.csv")
        assert cols == ["t", "rho1", "empirical"]
        t = np.array([float(r[0]) for r in rows])
        rho = np.array([float(r[1]) for r in rows])
        assert all(r[2] == "" for r in rows)
        assert np.sum(rho) * (t[1] - t[0]) == pytest.approx(2.0, abs=1e-3)

    def test_empty_sample_file(self, tmp_path):
        f = tmp_path / "empty.csv"
        f.write_text("x1,x2\n")
        code, out = run(tmp_path, "density", {"ensemble": COUPLED, "t": [0.5, 1.0],
                                              "sample_file": str(f)})
        assert code == EXIT["ok"]
        m = json.loads((out / "density.json").read_text())
        assert "chi2" not in m

    def test_chi_square(self, tmp_path, capsys):
        s = tmp_path / "s"
        s.mkdir()
        run(s, "sample", {"ensemble": COUPLED, "count": 2000, "seed": 42})
        cfg = {"ensemble": COUPLED, "t": {"min": 0.05, "max": 10.0, "points": 50},
               "sample_file": str(s / "out" / "sample.csv"), "bins": 10}
        code, out = run(tmp_path, "density", cfg)
        assert code == EXIT["ok"]
        m = json.loads((out / "density.json").read_text())
        assert m["dof"] == 9 and sum(m["counts"]) == 4000
        assert "dof = 9" in capsys.readouterr().out
        _, rows = read_csv(out / "density.csv")
        assert all(r[2] != "" for r in rows)

    def test_sample_width_mismatch(self, tmp_path):
        f = tmp_path / "three.csv"
        f.write_text("x1,x2,x3\n1,2,3\n")
        cfg = {"ensemble": COUPLED, "t": [0.5], "sample_file": str(f)}
        assert run(tmp_path, "density", cfg)[0] == EXIT["config"]

    def test_bad_grid(self, tmp_path):
        cfg = {"ensemble": COUPLED, "t": [1.0, 0.5]}
        assert run(tmp_path, "density", cfg)[0] == EXIT["config"]


class TestScan:
    def test_default_regime_III(self, tmp_path):
        code, out = run(tmp_path, "scan", {}, "--assert-trend", "--threads", "4")
        assert code == EXIT["ok"]
        cols, rows = read_csv(out / "scan.csv")
        assert cols[0] == "N" and len(rows) == 4 * 3
        m = json.loads((out / "scan.json").read_text())
        assert m["trend_ok"] and m["schedule"] == {"rule": "vanishing", "value": 0.1}

    def test_row_count(self, tmp_path):
        cfg = {"regime": "II", "tau": 1.0, "N_list": [8, 16],
               "perturbations": {"pi_hat": [0.2]}, "probe": [[1.0, 1.0]]}
        code, out = run(tmp_path, "scan", cfg)
        assert code == EXIT["ok"]
        assert len(read_csv(out / "scan.csv")[1]) == 2

    def test_assert_trend_needs_three_points(self, tmp_path):
        assert run(tmp_path, "scan", {"N_list": [8]}, "--assert-trend")[0] == EXIT["config"]

    def test_trend_failure(self, tmp_path):
        # the to-I error changes sign between tau = 1 and 16 at this probe
        cfg = {"mode": "interpolation", "direction": "to-I", "probe": [[2.0, 1.0]],
               "tau_list": [1.0, 4.0, 16.0]}
        code, out = run(tmp_path, "scan", cfg, "--assert-trend")
        assert code == EXIT["assertion"]
        assert not json.loads((out / "scan.json").read_text())["trend_ok"]

    def test_failed_cell(self, tmp_path):
        cfg = {"N_list": [1, 8], "perturbations": {"pi_hat": [0.5, 0.6]}, "probe": [[1.0, 2.0]]}
        code, out = run(tmp_path, "scan", cfg)
        assert code == EXIT["convergence"]
        _, rows = read_csv(out / "scan.csv")
        assert rows[0][-1].startswith("DomainError") and rows[1][-1] == "ok"

    def test_schedule_mismatch(self, tmp_path):
        cfg = {"regime": "II", "tau": 1.0, "schedule": {"rule": "constant", "value": 0.5}}
        assert run(tmp_path, "scan", cfg)[0] == EXIT["validation"]

    def test_interpolation_columns(self, tmp_path):
        cfg = {"mode": "interpolation", "direction": "to-III", "tau_list": [1.0, 0.25],
               "probe": [[1.0, 1.0]]}
        code, out = run(tmp_path, "scan", cfg)
        assert code == EXIT["ok"]
        cols, rows = read_csv(out / "scan.csv")
        assert cols[0] == "tau" and len(rows) == 2

    def test_threads_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RMT_KIT_THREADS", "2")
        _, out = run(tmp_path, "scan", {"N_list": [8], "probe": [[1.0, 2.0]]})
        assert json.loads((out / "scan.json").read_text())["threads"] == 2
        monkeypatch.setenv("RMT_KIT_THREADS", "many")
        assert run(tmp_path, "scan", {"N_list": [8]})[0] == EXIT["config"]


class TestEntryPoint:
    def test_module_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{}")
        res = subprocess.run([sys.executable, "-m", "rmt_kit", "validate", "--config", str(cfg)],
                             capture_output=True, text=True, cwd=tmp_path)
        assert res.returncode == EXIT["config"]
        assert "missing field 'ensemble'" in res.stderr

    def test_atomic_outputs_leave_no_temporaries(self, tmp_path):
        _, out = run(tmp_path, "kernel", {"limit": {"kernel": "bessel"}, "x": [1.0], "y": [2.0]})
        assert sorted(os.listdir(out)) == ["kernel.csv", "kernel.json"]
