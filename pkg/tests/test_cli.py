"""Tests for the command-line harness: angle parsing, config handling,
output round-trips, determinism and the verification suites."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ualyap.cli import CliError, main, parse_angle


def run_cli(args, **kwargs):
    return subprocess.run(
        [sys.executable, "-m", "ualyap.cli", *args],
        capture_output=True,
        text=True,
        **kwargs,
    )


class TestParseAngle:
    @pytest.mark.parametrize(
        "text,value",
        [
            ("0.7", 0.7),
            ("pi", math.pi),
            ("pi/2", math.pi / 2),
            ("-pi/3", -math.pi / 3),
            ("2*pi/3", 2 * math.pi / 3),
            ("pi + 0.1", math.pi + 0.1),
            ("-3*pi/4", -3 * math.pi / 4),
        ],
    )
    def test_valid(self, text, value):
        assert parse_angle(text) == value  # exact nearest-double

    @pytest.mark.parametrize("text", ["tau", "pi**2", "import os", "1; 2", ""])
    def test_invalid(self, text):
        with pytest.raises(CliError):
            parse_angle(text)


class TestEstimateAndSweep:
    COMMON = ["--atoms", "0:0.5,pi:0.5", "--n", "500", "--R", "4", "--seed", "3"]

    def test_single_point_sweep_equals_estimate(self):
        est = run_cli(["estimate", "0.8", *self.COMMON])
        swp = run_cli(["sweep", "--lambdas", "0.8", *self.COMMON])
        assert est.returncode == 0 and swp.returncode == 0
        # identical numeric rows (the config echo differs by the grid spec)
        assert est.stdout.splitlines()[-1] == swp.stdout.splitlines()[-1]

    def test_deterministic_rerun(self):
        a = run_cli(["sweep", "--lambdas", "0.3:1.0:5", *self.COMMON])
        b = run_cli(["sweep", "--lambdas", "0.3:1.0:5", *self.COMMON])
        assert a.stdout == b.stdout

    def test_csv_round_trip(self, tmp_path):
        out = tmp_path / "sweep.csv"
        res = run_cli(
            ["sweep", "--lambdas", "0.5,1.0", *self.COMMON, "--output", str(out)]
        )
        assert res.returncode == 0
        lines = out.read_text().splitlines()
        config_line = next(l for l in lines if l.startswith("# config:"))
        cfg = json.loads(config_line[len("# config:") :])
        assert cfg["n"] == 500 and cfg["seed"] == 3
        header = next(l for l in lines if not l.startswith("#"))
        assert header.split(",")[:3] == ["lambda", "gamma_mean", "gamma_stderr"]
        rows = [l.split(",") for l in lines if not l.startswith("#")][1:]
        # 17-significant-digit round trip: parsing reproduces the doubles
        direct = run_cli(["sweep", "--lambdas", "0.5,1.0", *self.COMMON])
        direct_rows = [
            l.split(",") for l in direct.stdout.splitlines() if not l.startswith("#")
        ][1:]
        for r1, r2 in zip(rows, direct_rows):
            assert float(r1[1]) == float(r2[1])

    def test_json_mirror(self, tmp_path):
        res = run_cli(
            ["sweep", "--lambdas", "0.5,1.0", *self.COMMON, "--format", "json"]
        )
        payload = json.loads(res.stdout)
        assert payload["columns"][0] == "lambda"
        assert len(payload["rows"]) == 2
        assert payload["config"]["R"] == 4

    def test_config_file_with_override(self, tmp_path):
        cfg = {
            "model": "anderson",
            "t": 0.6,
            "measure": {"kind": "finite", "atoms": [[0.0, 0.5], [math.pi, 0.5]]},
            "lambdas": {"values": [0.8]},
            "n": 400,
            "R": 4,
            "seed": 5,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        base = run_cli(["sweep", "--config", str(path)])
        overridden = run_cli(["sweep", "--config", str(path), "--n", "200"])
        assert base.returncode == 0 and overridden.returncode == 0
        assert '"n": 400' in base.stdout and '"n": 200' in overridden.stdout

    def test_dimer_model(self):
        res = run_cli(
            ["estimate", "0", "--model", "dimer", "--atoms", "0:0.5,pi:0.5",
             "--n", "2000", "--R", "8", "--seed", "1"]
        )
        assert res.returncode == 0
        val = float(res.stdout.splitlines()[-1].split(",")[1])
        # resolvent-case dimer critical value ~ 0.8814
        assert val == pytest.approx(0.8814, rel=0.05)


class TestErrors:
    def test_bad_t(self):
        res = run_cli(["estimate", "0.5", "--t", "1.5"])
        assert res.returncode == 1
        assert "error" in res.stderr

    def test_bad_probabilities(self):
        res = run_cli(["estimate", "0.5", "--atoms", "0:0.5,1:0.2"])
        assert res.returncode == 1

    def test_unknown_command(self):
        res = run_cli(["frobnicate"])
        assert res.returncode == 1

    def test_missing_config_file(self):
        res = run_cli(["estimate", "0.5", "--config", "/nonexistent.json"])
        assert res.returncode == 1

    def test_single_atom_diagnose(self):
        res = run_cli(["diagnose", "0.5", "--atoms", "0:1.0"])
        assert res.returncode == 1
        assert "non-trivial" in res.stderr


class TestDiagnose:
    def test_pair_witnesses(self):
        res = run_cli(["diagnose", "0.7", "--atoms", "0:0.5,pi/2:0.5"])
        assert res.returncode == 0
        report = json.loads(res.stdout)
        assert len(report["pairs"]) == 2
        for pair in report["pairs"]:
            assert pair["noncompact"]
            assert pair["trace_K"] == pytest.approx(pair["closed_form"], abs=1e-9)

    def test_pi_case_section(self):
        res = run_cli(["diagnose", "0.7", "--atoms", "0:0.5,pi:0.5"])
        report = json.loads(res.stdout)
        assert report["pi_case"]["distinct_images"]

    def test_dimer_critical_set(self):
        res = run_cli(
            ["diagnose", "0.5", "--model", "dimer", "--atoms", "0.3:0.5,1.1:0.5"]
        )
        report = json.loads(res.stdout)
        pts = report["dimer_critical_set"]["points"]
        assert len(pts) == 2  # generic pair: M = {-a, -b}
        assert report["dimer_critical_set"]["extra"] == []


class TestVerify:
    def test_all_suites_pass(self):
        res = run_cli(["verify", "--seed", "1"])
        assert res.returncode == 0
        assert res.stderr.count("[pass]") == 6
        assert "[FAIL]" not in res.stderr

    def test_corrupted_stencil_fails(self):
        res = run_cli(["verify", "--seed", "1", "--corrupt-stencil"])
        assert res.returncode == 2
        assert "eigen-recursion" in res.stderr


def test_main_callable_directly():
    assert main(["estimate", "1.0", "--atoms", "0:0.5,pi:0.5",
                 "--n", "100", "--R", "2", "--seed", "0"]) == 0
