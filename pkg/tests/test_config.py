from __future__ import annotations

import sys
from pathlib import Path

import pytest

import fracground.config as config_module
from fracground.config import (
    ConfigError,
    InitialWave,
    RunConfig,
    Settings,
    dump_run_config,
    load_run_config,
    load_settings,
    parse_run_config,
    resolve_run_config,
)
from fracground.schemas import CheckName, PotentialKind

WELL_CONFIG = """
dim = 1
L = 40.0
M = 256
s = 0.5
seed = 7

potential.kind = "well"
potential.params = { v_inf = 2.0, depth = 1.0, width = 1.0 }

solver.tol_grad = 1e-7
sweep.epsilons = [1.0, 0.5]
verify.checks = ["pohozaev", "concentration"]
verify.decay_window = [5.0, 15.0]
evolve.initial = "gaussian"
"""


def test_dotted_keys_fill_nested_blocks():
    config = parse_run_config(WELL_CONFIG)
    assert (config.dim, config.L, config.M, config.s) == (1, 40.0, 256, 0.5)
    assert config.potential.kind is PotentialKind.WELL
    assert config.potential.params == {"v_inf": 2.0, "depth": 1.0, "width": 1.0}
    assert config.solver.tol_grad == 1e-7
    assert config.solver.max_iters == 50000
    assert config.sweep.epsilons == [1.0, 0.5]
    assert config.verify.checks == [CheckName.POHOZAEV, CheckName.CONCENTRATION]
    assert config.verify.decay_window == (5.0, 15.0)
    assert config.evolve.initial is InitialWave.GAUSSIAN


def test_unknown_keys_are_rejected_with_their_path():
    with pytest.raises(ConfigError, match=r"solver\.tolerance"):
        parse_run_config("solver.tolerance = 1e-6\n", "run.toml")
    with pytest.raises(ConfigError, match="run.toml"):
        parse_run_config("grid_points = 12\n", "run.toml")


def test_toml_reader_matches_the_interpreter():
    expected = "tomllib" if sys.version_info >= (3, 11) else "tomli"
    assert config_module.tomllib.__name__ == expected
    assert parse_run_config("dim = 2\n").dim == 2


def test_syntax_errors_name_the_line():
    with pytest.raises(ConfigError, match="line"):
        parse_run_config("dim = 1\nL = = 3\n")


def test_invalid_values_are_rejected():
    with pytest.raises(ConfigError, match="dt"):
        parse_run_config("evolve.dt = -1.0\n")
    with pytest.raises(ConfigError, match="backtrack"):
        parse_run_config("solver.backtrack = 1.5\n")
    with pytest.raises(ConfigError, match="requires params"):
        parse_run_config('potential.kind = "well"\n')


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.toml")
    assert load_run_config(None) == RunConfig()


def test_precedence_flag_over_file_over_environment():
    settings = Settings(output_dir="env_out")
    config = parse_run_config(WELL_CONFIG)

    resolved = resolve_run_config(config, settings)
    assert resolved.output_dir == "env_out"
    assert resolved.seed == 7 and resolved.solver.seed == 7

    resolved = resolve_run_config(config.model_copy(update={"output_dir": "file_out"}), settings)
    assert resolved.output_dir == "file_out"

    resolved = resolve_run_config(config.model_copy(update={"output_dir": "file_out"}), settings,
                                  out="flag_out", seed=11)
    assert resolved.output_dir == "flag_out"
    assert resolved.seed == 11 and resolved.solver.seed == 11


def test_solver_seed_survives_without_a_top_level_seed():
    config = parse_run_config("solver.seed = 5\n")
    resolved = resolve_run_config(config, Settings())
    assert resolved.seed is None
    assert resolved.solver.seed == 5


def test_resolved_config_reparses_to_the_same_run():
    config = resolve_run_config(parse_run_config(WELL_CONFIG), Settings(), out="x")
    config = config.model_copy(update={"epsilon": 0.5})
    assert parse_run_config(dump_run_config(config)) == config


def test_epsilon_wraps_the_potential():
    config = parse_run_config(WELL_CONFIG + "epsilon = 0.25\n")
    effective = config.effective_potential()
    assert effective.kind is PotentialKind.RESCALED
    assert effective.epsilon == 0.25
    assert effective.inner == config.potential
    assert parse_run_config(WELL_CONFIG).effective_potential() == config.potential


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("FRACGROUND_OUT", "/tmp/fracground-runs")
    monkeypatch.setenv("FRACGROUND_JOBS", "0")
    monkeypatch.setenv("LOG_LEVEL", "DEBUG")
    settings = load_settings()
    assert settings.output_dir == "/tmp/fracground-runs"
    assert settings.jobs == 1
    assert settings.log_level == "DEBUG"
    assert settings.abs_output_dir() == Path("/tmp/fracground-runs")
    assert settings.abs_output_dir("rel").is_absolute()
