from __future__ import annotations

import math

import numpy as np
import pytest

from fracground.schemas import PotentialKind, PotentialSpec, SolverConfig
from fracground.services.energy import e_norm_sq, nehari_residual
from fracground.services.grid import gaussian_bump, random_band_limited, zeros
from fracground.services.model import make_model
from fracground.services.nehari import (
    ProjectionError,
    closed_form_scale,
    fiber_profile,
    fibering_max,
    initial_bump,
    level_estimate,
    project,
)

WELL = PotentialSpec(kind=PotentialKind.WELL, params={"v_inf": 2.0, "depth": 1.0, "width": 1.0})


@pytest.fixture
def well_model(small_grid):
    return make_model(small_grid, 0.6, WELL, p=3.0)


@pytest.fixture
def trial(small_grid, rng):
    return gaussian_bump(small_grid, width=1.5) + 0.2 * random_band_limited(small_grid, rng, kmax=10)


def test_projection_matches_closed_form(well_model, trial):
    result = project(well_model, trial)
    assert result.t_star == pytest.approx(closed_form_scale(well_model, trial), rel=1e-10)
    assert abs(nehari_residual(well_model, result.projected)) <= 1e-10 * e_norm_sq(well_model, result.projected)


@pytest.mark.parametrize("scale", [0.1, 10.0])
def test_projection_is_scale_invariant(well_model, trial, scale):
    base = project(well_model, trial).projected
    scaled = project(well_model, scale * trial).projected
    assert np.max(np.abs(scaled.values - base.values)) <= 1e-10 * base.max_abs()


def test_fibering_max_dominates_theta_scan(well_model, trial):
    peak = fibering_max(well_model, trial)
    t_star = project(well_model, trial).t_star
    thetas = t_star * np.linspace(0.01, 3.0, 600)
    assert np.max(fiber_profile(well_model, trial, thetas)) <= peak + 1e-12 * abs(peak)


def test_zero_field_cannot_be_projected(well_model, small_grid):
    with pytest.raises(ProjectionError):
        project(well_model, zeros(small_grid))


def test_nonpositive_field_has_no_positive_projection(small_grid):
    model = make_model(small_grid, 0.5, 1.0, positive_mode=True)
    with pytest.raises(ProjectionError):
        project(model, -gaussian_bump(small_grid))


def test_exact_profile_lies_on_the_manifold(bench_model, exact_profile):
    result = project(bench_model, exact_profile)
    assert result.t_star == pytest.approx(1.0, abs=1e-3)
    assert result.fiber_value == pytest.approx(0.5 * math.pi, abs=1e-3)


def test_initial_bumps_follow_the_seed_counter(bench_model):
    first = initial_bump(bench_model, seed=7, index=0)
    again = initial_bump(bench_model, seed=7, index=0)
    other = initial_bump(bench_model, seed=7, index=1)
    np.testing.assert_array_equal(first.values, again.values)
    assert not np.array_equal(first.values, other.values)
    assert first.norm() == pytest.approx(1.0)


def test_level_estimate_takes_the_lowest_converged_start(small_grid):
    model = make_model(small_grid, 0.5, 1.0, p=2.0)
    estimate = level_estimate(model, starts=3, seed=5, config=SolverConfig(seed=5))
    assert len(estimate.levels) == 3
    assert estimate.non_converged == 0
    assert estimate.level == min(estimate.levels)
    assert estimate.levels[estimate.best_index] == estimate.level


def test_more_starts_never_raise_the_estimate(small_grid):
    model = make_model(small_grid, 0.5, 1.0, p=2.0)
    single = level_estimate(model, starts=1, seed=8)
    several = level_estimate(model, starts=5, seed=8)
    assert several.levels[0] == single.levels[0]
    assert several.level <= single.level


def test_level_estimate_is_independent_of_workers(small_grid):
    model = make_model(small_grid, 0.5, 1.0, p=2.0)
    serial = level_estimate(model, starts=2, seed=3)
    pooled = level_estimate(model, starts=2, seed=3, jobs=2)
    assert pooled.levels == serial.levels
    assert pooled.best_index == serial.best_index


def test_level_estimate_needs_a_start(small_grid):
    with pytest.raises(ValueError):
        level_estimate(make_model(small_grid, 0.5, 1.0), starts=0, seed=0)
