from __future__ import annotations

import math

import numpy as np
import pytest

from fracground.schemas import PotentialKind, PotentialSpec
from fracground.services.energy import (
    dealias_filter,
    e_norm_sq,
    energy,
    gradient,
    nehari_residual,
    nonlinear_pairing,
)
from fracground.services.grid import gaussian_bump, inner, random_band_limited, transform
from fracground.services.model import make_model

WELL = PotentialSpec(kind=PotentialKind.WELL, params={"v_inf": 2.0, "depth": 1.0, "width": 1.0})


def test_benchmark_energy_parts(bench_model, exact_profile):
    parts = energy(bench_model, exact_profile)
    assert parts.kinetic == pytest.approx(0.5 * math.pi, rel=1e-3)
    assert parts.potential == pytest.approx(math.pi, rel=1e-3)
    assert parts.nonlinear == pytest.approx(math.pi, rel=1e-3)
    assert parts.total == pytest.approx(0.5 * math.pi, abs=1e-3)
    assert e_norm_sq(bench_model, exact_profile) == pytest.approx(2.0 * (parts.kinetic + parts.potential))


def test_exact_profile_is_nearly_stationary(bench_model, exact_profile):
    g = gradient(bench_model, exact_profile)
    assert g.norm() / exact_profile.norm() <= 1e-3


def test_gradient_matches_central_differences(small_grid, rng):
    model = make_model(small_grid, 0.4, WELL, p=3.0)
    u = gaussian_bump(small_grid, width=2.0, mass=2.0) + 0.1 * random_band_limited(small_grid, rng, kmax=12)
    g = gradient(model, u)
    eps = 1e-4
    for _ in range(20):
        v = random_band_limited(small_grid, rng, kmax=24)
        fd = (energy(model, u + eps * v).total - energy(model, u - eps * v).total) / (2.0 * eps)
        assert abs(fd - inner(g, v)) <= 1e-6 * g.norm() * v.norm()


def test_nehari_residual_is_the_derivative_along_the_ray(small_grid):
    model = make_model(small_grid, 0.5, 1.0, p=2.0)
    u = gaussian_bump(small_grid, width=1.5)
    assert nehari_residual(model, u) == pytest.approx(inner(gradient(model, u), u), rel=1e-10)
    assert nehari_residual(model, u) == pytest.approx(e_norm_sq(model, u) - nonlinear_pairing(model, u))


def test_dealiasing_leaves_low_modes_alone(small_grid, rng):
    plain = make_model(small_grid, 0.5, 1.0, p=2.0)
    filtered = make_model(small_grid, 0.5, 1.0, p=2.0, dealias=True)
    u = random_band_limited(small_grid, rng, kmax=20)
    np.testing.assert_allclose(gradient(filtered, u).values, gradient(plain, u).values, atol=1e-12)


def test_dealiasing_removes_top_third(small_grid, rng):
    filtered = make_model(small_grid, 0.5, 1.0, p=2.0, dealias=True)
    u = random_band_limited(small_grid, rng, kmax=120)
    linear = gradient(make_model(small_grid, 0.5, 1.0, p=2.0, weight=0.0), u)
    nonlinear = linear - gradient(filtered, u)
    coeffs = transform(nonlinear).coeffs
    mask = dealias_filter(small_grid)
    assert np.max(np.abs(coeffs[~mask])) <= 1e-12 * np.max(np.abs(coeffs))
