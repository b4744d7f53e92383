from __future__ import annotations

import math

import numpy as np
import pytest

from fracground.schemas import Branch, PotentialKind, PotentialSpec, SolverConfig
from fracground.services.energy import energy
from fracground.services.fraclap import apply_fraclap
from fracground.services.grid import gaussian_bump, make_grid, random_band_limited, shift, zeros
from fracground.services.model import make_model
from fracground.services.nehari import ProjectionError
from fracground.services.solver import (
    RieszDirection,
    assess,
    center,
    compare_with_infinity,
    model_at_infinity,
    normalize_sign,
    solve_ground_state,
    solve_positive,
    sweep_epsilon,
    sweep_potential,
)
from fracground.services.verify import profile_error, singular_perturbation_residual

WELL = PotentialSpec(kind=PotentialKind.WELL, params={"v_inf": 2.0, "depth": 1.0, "width": 1.0})


def test_benchmark_ground_state(bench_state, exact_profile):
    assert bench_state.converged, bench_state.message
    assert bench_state.level == pytest.approx(0.5 * math.pi, abs=1e-3)
    assert profile_error(bench_state.u, exact_profile) <= 1e-3
    assert bench_state.history[-1] <= bench_state.history[0]


def test_benchmark_descent_is_monotone_up_to_roundoff(bench_state):
    assert bench_state.descent_monotone
    assert bench_state.summary().descent_monotone
    rises = [b - a for a, b in zip(bench_state.history, bench_state.history[1:])]
    assert max(rises) <= 1e-12


def test_assess_agrees_with_the_solver(bench_model, bench_state, exact_profile):
    judged = assess(bench_model, bench_state.u)
    assert judged.converged
    assert judged.iters == 0
    assert judged.level == pytest.approx(bench_state.level, rel=1e-14)
    supplied = assess(bench_model, exact_profile)
    assert not supplied.converged
    assert supplied.grad_norm <= 1e-3


def test_positive_solve_from_a_sign_flipped_start(bench_model):
    model = bench_model.with_positive_mode()
    gs = solve_positive(model, initial=-gaussian_bump(model.grid, width=2.0))
    assert gs.reflected_start
    assert gs.converged
    assert gs.positivity_ok
    assert np.min(gs.u.values) >= -1e-8 * np.max(gs.u.values)
    assert gs.level == pytest.approx(0.5 * math.pi, abs=1e-3)


def test_positive_solve_needs_positive_mode(bench_model):
    with pytest.raises(ValueError):
        solve_positive(bench_model)


def test_positive_solve_rejects_zero_start(bench_model):
    with pytest.raises(ProjectionError):
        solve_positive(bench_model.with_positive_mode(), initial=zeros(bench_model.grid))


def test_iteration_limit_is_reported(small_grid):
    model = make_model(small_grid, 0.5, 1.0)
    gs = solve_ground_state(model, SolverConfig(max_iters=2))
    assert not gs.converged
    assert gs.iters == 2
    assert gs.message == "iteration limit reached"


def test_center_and_sign_normalization(exact_profile):
    moved = -shift(exact_profile, (3.3,))
    aligned = center(normalize_sign(moved))
    assert aligned.values[exact_profile.grid.origin_index] == pytest.approx(exact_profile.max_abs(), rel=1e-3)
    assert profile_error(moved, exact_profile) <= 1e-3


def test_riesz_direction_inverts_the_operator(small_grid, rng):
    model = make_model(small_grid, 0.5, WELL)
    g = random_band_limited(small_grid, rng, kmax=30)
    d = RieszDirection(model, SolverConfig(cg_rtol=1e-12))(g)
    back = apply_fraclap(d, model.s).values + model.v_values * d.values
    assert np.max(np.abs(back - g.values)) <= 1e-8 * g.max_abs()


def test_potential_sweep_follows_the_scaling_family(bench_model):
    sweep = sweep_potential(bench_model, [0.0, 1.0])
    assert sweep.converged == [True, True]
    expected = [0.5 * math.pi, 2.0 * math.pi]
    for level, exact in zip(sweep.levels, expected):
        assert level == pytest.approx(exact, rel=1e-2)
    assert sweep.is_monotone(1e-6)
    assert len(sweep.states) == 2


def test_sweep_records_failed_points(small_grid):
    model = make_model(small_grid, 0.5, 1.0)
    sweep = sweep_potential(model, [0.0, -2.0])
    assert sweep.converged[1] is False
    assert sweep.levels[1] is None
    assert "V1" in sweep.points[1].error
    assert sweep.levels[0] is not None


def test_level_is_translation_invariant(small_grid):
    model = make_model(small_grid, 0.5, 1.0, p=2.0)
    centered = solve_ground_state(model)
    displaced = solve_ground_state(model, initial=gaussian_bump(small_grid, center=(6.0,)))
    assert displaced.converged and centered.converged
    assert displaced.level == pytest.approx(centered.level, rel=1e-8)
    rolled = shift(centered.u, (37 * small_grid.spacing,))
    assert energy(model, rolled).total == pytest.approx(centered.level, rel=1e-12)


def test_unit_epsilon_sweep_matches_a_direct_solve(small_grid):
    model = make_model(small_grid, 0.5, WELL, p=2.0)
    sweep = sweep_epsilon(model, [1.0])
    direct = solve_ground_state(model)
    assert sweep.converged == [True]
    assert sweep.levels[0] == pytest.approx(direct.level, rel=1e-10)


def test_levels_converge_as_the_box_grows():
    errors = []
    for extent, points in [(20.0, 128), (40.0, 256), (80.0, 512)]:
        model = make_model(make_grid(1, extent, points), 0.5, 1.0, p=2.0)
        gs = solve_ground_state(model)
        assert gs.converged, gs.message
        errors.append(abs(gs.level - 0.5 * math.pi))
    assert errors[2] < errors[1] < errors[0]


def test_problem_at_infinity_needs_finite_limit(small_grid):
    coercive = PotentialSpec(kind=PotentialKind.COERCIVE, params={"base": 1.0, "coef": 1.0, "power": 2.0})
    with pytest.raises(ValueError):
        model_at_infinity(make_model(small_grid, 0.5, coercive))
    constant = model_at_infinity(make_model(small_grid, 0.5, WELL))
    assert constant.potential.is_constant
    assert constant.v_values[0] == pytest.approx(2.0)


@pytest.mark.slow
def test_epsilon_sweep_stays_below_the_level_at_infinity():
    grid = make_grid(1, 160.0, 1024)
    model = make_model(grid, 0.5, WELL)
    sweep = sweep_epsilon(model, [1.0, 0.25])
    assert all(sweep.converged)
    assert sweep.reference_level == pytest.approx(2.0 * math.pi, rel=1e-2)
    assert sweep.margins[-1] > 0
    assert sweep.branches == [Branch.CRITICAL, Branch.CRITICAL]
    for eps, gs in zip([1.0, 0.25], sweep.states):
        rescaled = model.with_potential(model.potential.rescaled(eps))
        assert singular_perturbation_residual(rescaled, gs) <= 1e-6


@pytest.mark.slow
def test_comparison_with_infinity_for_a_well():
    grid = make_grid(1, 160.0, 1024)
    comparison = compare_with_infinity(make_model(grid, 0.5, WELL))
    assert comparison.level < comparison.level_at_infinity
    assert comparison.upper_bound < comparison.level_at_infinity
    assert comparison.level <= comparison.upper_bound + 1e-8
    assert comparison.gap > 0
    assert comparison.branch is Branch.CRITICAL
