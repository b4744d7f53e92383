from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from fracground.cli import main

SMALL = """
dim = 1
L = 40.0
M = 256
s = 0.5
p = 2.0
seed = 3
"""


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, body: str, name: str = "run.toml"):
    path = tmp_path / name
    path.write_text(body)
    return path


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)


def load(path):
    payload = json.loads(path.read_text())
    payload.pop("created_at")
    return payload


# ----------------------------------------------------------------------
# Configuration and validation failures
# ----------------------------------------------------------------------

def test_validate_reports_the_failing_assumption(runner, tmp_path):
    config = write_config(tmp_path, SMALL + "potential.params = { value = -1.0 }\n")
    result = invoke(runner, "validate", "--config", config)
    assert result.exit_code == 1
    assert "V1" in result.output and "witness=-1" in result.output


def test_validate_passes_a_valid_model(runner, tmp_path):
    result = invoke(runner, "validate", "--config", write_config(tmp_path, SMALL))
    assert result.exit_code == 0
    assert "V1" in result.output


def test_solve_refuses_a_negative_potential(runner, tmp_path):
    config = write_config(tmp_path, SMALL + "potential.params = { value = -1.0 }\n")
    result = invoke(runner, "solve", "--config", config, "--out", tmp_path / "out")
    assert result.exit_code == 1
    assert "V1" in result.output and "witness=-1" in result.output
    assert not (tmp_path / "out" / "report.json").exists()


def test_malformed_config_exits_with_status_one(runner, tmp_path):
    result = invoke(runner, "solve", "--config", write_config(tmp_path, "dim = = 1\n"), "--out", tmp_path / "out")
    assert result.exit_code == 1
    assert "line" in result.output

    result = invoke(runner, "solve", "--config", write_config(tmp_path, "solver.speed = 2\n"), "--out", tmp_path / "out")
    assert result.exit_code == 1
    assert "solver.speed" in result.output


# ----------------------------------------------------------------------
# Runs
# ----------------------------------------------------------------------

def test_solve_writes_its_outputs(runner, tmp_path):
    out = tmp_path / "solve"
    result = invoke(runner, "solve", "--config", write_config(tmp_path, SMALL), "--out", out)
    assert result.exit_code == 0, result.output
    assert (out / "fields" / "ground_state.csv").exists()
    assert (out / "resolved.config").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "solve"
    assert report["checks"][0]["name"] == "converged" and report["checks"][0]["pass"] is True
    assert report["checks"][0]["quantities"]["descent_monotone"] is True
    assert report["summary"]["failed"] == 0
    assert report["model"]["M"] == 256


def test_identical_runs_give_identical_reports(runner, tmp_path):
    config = write_config(tmp_path, SMALL)
    first, second, rerun = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert invoke(runner, "solve", "--config", config, "--out", first).exit_code == 0
    assert invoke(runner, "solve", "--config", config, "--out", second).exit_code == 0
    assert load(first / "report.json") == load(second / "report.json")

    result = invoke(runner, "solve", "--config", first / "resolved.config", "--out", rerun)
    assert result.exit_code == 0
    assert load(rerun / "report.json") == load(first / "report.json")


def test_solve_positive(runner, tmp_path):
    out = tmp_path / "positive"
    result = invoke(runner, "solve-positive", "--config", write_config(tmp_path, SMALL), "--out", out)
    assert result.exit_code == 0, result.output
    assert (out / "fields" / "ground_state_positive.csv").exists()
    names = [c["name"] for c in json.loads((out / "report.json").read_text())["checks"]]
    assert names == ["converged", "positivity"]


def test_sweep_potential(runner, tmp_path):
    out = tmp_path / "sweep"
    config = write_config(tmp_path, SMALL + "sweep.shifts = [0.0, 1.0]\n")
    result = invoke(runner, "sweep-potential", "--config", config, "--out", out, "--jobs", 1)
    assert result.exit_code == 0, result.output
    lines = (out / "diag" / "sweep_potential.csv").read_text().splitlines()
    assert lines[0] == "shift,level,converged" and len(lines) == 3
    report = json.loads((out / "report.json").read_text())
    assert report["summary"]["monotone"] is True
    low, high = report["summary"]["levels"]
    assert high > low


def test_evolve_gaussian(runner, tmp_path):
    out = tmp_path / "evolve"
    config = write_config(tmp_path, SMALL + 'evolve.initial = "gaussian"\nevolve.dt = 0.01\n'
                          "evolve.steps = 100\nevolve.record_every = 10\n")
    result = invoke(runner, "evolve", "--config", config, "--out", out)
    assert result.exit_code == 0, result.output
    assert (out / "diag" / "evolve.csv").read_text().splitlines()[0] == "t,mass,energy"
    assert (out / "fields" / "final_wave.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert [c["name"] for c in report["checks"]] == ["blow_up", "mass_drift"]
    assert report["summary"]["final_time"] == pytest.approx(1.0)


def test_verify_selected_suites(runner, tmp_path):
    out = tmp_path / "verify"
    config = write_config(tmp_path, SMALL + 'verify.checks = ["level", "cutoff"]\nverify.radii = [5.0, 10.0]\n')
    result = invoke(runner, "verify", "--config", config, "--out", out, "--jobs", 1)
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    names = [c["name"] for c in report["checks"]]
    assert names == ["converged", "level_consistency", "level_estimate", "cutoff"]
    assert (out / "fields" / "verified_field.csv").exists()


def test_verify_a_supplied_field(runner, tmp_path):
    config = write_config(tmp_path, SMALL)
    assert invoke(runner, "solve", "--config", config, "--out", tmp_path / "solved").exit_code == 0
    field = tmp_path / "solved" / "fields" / "ground_state.csv"
    supplied = write_config(tmp_path, SMALL + f'verify.checks = ["cutoff"]\nverify.field = "{field}"\n', "v.toml")
    out = tmp_path / "verify"
    result = invoke(runner, "verify", "--config", supplied, "--out", out)
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    assert report["summary"]["supplied_field"] == str(field)
    assert report["checks"][0]["quantities"]["message"] == "supplied field"


@pytest.mark.slow
def test_benchmark_end_to_end(runner, tmp_path):
    out = tmp_path / "bench"
    result = invoke(runner, "benchmark", "--out", out, "--jobs", 1)
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    assert report["summary"]["failed"] == 0
    assert report["summary"]["level"] == pytest.approx(1.5707963, rel=1e-3)
