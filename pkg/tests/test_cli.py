"""Command-line front end: config merging, formats, exit codes, round trips."""

import csv
import io
import json

import pytest

from reluinj.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, load_config, main

WEAK2_OPT = ["--alphas", "6.7004", "8.267", "--r", "1.7697", "--gamma-bar", "0.8935", "0.9642",
          "--gamma", "0.3078", "--nu", "0.5560"]


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


class TestEvaluate:
    def test_weak2_json(self):
        code, out, _ = run(["evaluate", "--format", "json"] + WEAK2_OPT)
        assert code == EXIT_OK
        payload = json.loads(out)
        assert abs(payload["total"]) < 5e-3
        assert payload["method"] == "plain" and payload["grid_nodes"] == 200

    def test_pretty_has_six_digits(self):
        code, out, _ = run(["evaluate"] + WEAK2_OPT)
        assert code == EXIT_OK
        total = [line for line in out.splitlines() if line.strip().startswith("total")][0].split()[-1]
        mantissa = total.lower().split("e")[0].lstrip("-").replace(".", "").lstrip("0")
        assert len(mantissa) >= 6

    def test_csv(self):
        code, out, _ = run(["evaluate", "--format", "csv"] + WEAK2_OPT)
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["term", "value"]
        assert [r[0] for r in rows[1:]] == ["layer_1", "last_layer", "nu_term", "constant", "total"]

    def test_round_trip_bit_exact(self, tmp_path):
        first = tmp_path / "first.json"
        code, _, _ = run(["evaluate", "--format", "json", "--output", str(first), "--mode", "strong",
                          "--c3", "0.8315"] + WEAK2_OPT)
        assert code == EXIT_OK
        code, out, _ = run(["evaluate", "--format", "json", "--input", str(first)])
        assert code == EXIT_OK
        assert json.loads(out)["total"] == json.loads(first.read_text())["total"]
        assert json.loads(out)["mode"] == "strong"

    def test_missing_field(self):
        code, _, err = run(["evaluate", "--alphas", "6.7", "8.2", "--gamma-bar", "1", "1"])
        assert code == EXIT_CONFIG
        assert "'nu'" in json.loads(err)["message"]

    def test_layer_mismatch(self):
        code, _, err = run(["evaluate", "--alphas", "6.7", "8.2", "9.0", "--r", "1.7", "--gamma-bar", "1", "1",
                            "--gamma", "0.3", "--nu", "0.5"])
        assert code == EXIT_CONFIG

    def test_numerical_failure(self):
        # lifted moment diverges at this temperature
        code, _, err = run(["evaluate", "--c3", "3.0"] + WEAK2_OPT)
        assert code == EXIT_NUMERIC
        assert json.loads(err)["error"] == "DomainError"


class TestConfig:
    def test_missing_alpha1_named(self):
        code, _, err = run(["capacity", "--layers", "2", "--mode", "weak", "--method", "plain"])
        assert code == EXIT_CONFIG
        msg = json.loads(err)
        assert msg["error"] == "ConfigError" and "alpha1" in msg["message"]

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"alpha1": 6.7004, "layerz": 2}))
        code, _, err = run(["capacity", "--config", str(path)])
        assert code == EXIT_CONFIG
        assert "layerz" in json.loads(err)["message"]

    def test_key_of_other_command(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"trials": 3}))
        assert run(["capacity", "--config", str(path)])[0] == EXIT_CONFIG

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"mode": "strong", "alpha1": 6.0, "layers": 2}))
        cfg = load_config("capacity", str(path), {"mode": "weak"})
        assert cfg["mode"] == "weak" and cfg["alpha1"] == 6.0 and cfg["method"] == "plain"

    def test_bad_config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        assert run(["sequence", "--config", str(path)])[0] == EXIT_CONFIG

    def test_bad_choice(self):
        assert run(["capacity", "--mode", "medium"])[0] == EXIT_CONFIG

    def test_bad_solver_setting(self):
        code, _, err = run(["capacity", "--alpha1", "6.7004", "--layers", "2", "--multistarts", "0"])
        assert code == EXIT_CONFIG


class TestSolvingCommands:
    def test_capacity_then_evaluate(self, tmp_path):
        out_path = tmp_path / "cap.json"
        code, _, _ = run(["capacity", "--layers", "2", "--alpha1", "6.7004", "--multistarts", "2",
                          "--format", "json", "--output", str(out_path)])
        assert code == EXIT_OK
        payload = json.loads(out_path.read_text())
        assert payload["alpha_bound"] == pytest.approx(8.267, rel=1e-3)
        code, out, _ = run(["evaluate", "--format", "json", "--input", str(out_path)])
        assert code == EXIT_OK
        assert json.loads(out)["total"] == payload["breakdown"]["total"]

    def test_sequence_two_rows(self, tmp_path):
        png = tmp_path / "seq.png"
        code, out, _ = run(["sequence", "--max-layers", "2", "--alpha1", "6.7004", "--multistarts", "1",
                            "--format", "csv", "--plot", str(png)])
        assert code == EXIT_OK
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["quantity", "layer_1", "layer_2"]
        assert rows[1][0] == "alpha" and float(rows[1][2]) == pytest.approx(8.267, rel=1e-3)
        assert rows[2][0] == "expansion" and float(rows[2][2]) == pytest.approx(1.2338, rel=1e-3)
        assert png.stat().st_size > 0

    def test_sweep_crosses_zero(self, tmp_path):
        png = tmp_path / "sweep.png"
        code, out, _ = run(["sweep", "--prefix", "6.7004", "--alpha-grid", "9.0", "7.5", "--multistarts", "1",
                            "--format", "json", "--plot", str(png)])
        assert code == EXIT_OK
        rows = json.loads(out)["rows"]
        assert [r["alpha_l"] for r in rows] == [7.5, 9.0]
        assert rows[0]["phi0"] < 0 < rows[1]["phi0"]
        assert png.exists()

    def test_simulate(self, tmp_path):
        out_path = tmp_path / "sim.csv"
        png = tmp_path / "sim.png"
        code, _, _ = run(["simulate", "--n", "8", "--prefix", "3.0", "--alpha-grid", "0.5", "--trials", "3",
                          "--restarts", "1", "--stages", "4", "--steps-per-stage", "20", "--format", "csv",
                          "--output", str(out_path), "--plot", str(png)])
        assert code == EXIT_OK
        rows = list(csv.reader(io.StringIO(out_path.read_text())))
        assert rows[0] == ["alpha_l", "trials", "witnesses", "frequency"]
        assert rows[1] == ["0.5", "3", "3", "1.0"]
        assert png.exists()

    def test_module_entry_point(self):
        import subprocess
        import sys
        proc = subprocess.run([sys.executable, "-m", "reluinj", "evaluate", "--format", "json"] + WEAK2_OPT,
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "total" in json.loads(proc.stdout)
