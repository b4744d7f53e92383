from __future__ import annotations

import math

import numpy as np
import pytest

from fracground.services.fraclap import (
    apply_fraclap,
    c_ns_closed_form,
    c_ns_constant,
    check_order,
    gagliardo_seminorm_sq,
    hs_seminorm_sq,
    periodic_kernel,
    ws2_norm_sq,
)
from fracground.services.grid import Field, inner, make_grid, random_band_limited, sample


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_plane_wave_is_an_eigenfunction(small_grid, s):
    xi = 2.0 * np.pi * 5 / small_grid.extent
    u = sample(small_grid, lambda x: np.cos(xi * x))
    out = apply_fraclap(u, s)
    np.testing.assert_allclose(out.values, xi ** (2 * s) * u.values, atol=1e-12 * xi ** (2 * s))


def test_plane_wave_2d():
    grid = make_grid(2, 10.0, 32)
    k = 2.0 * np.pi / grid.extent * np.array([2.0, 3.0])
    u = sample(grid, lambda x, y: np.sin(k[0] * x + k[1] * y))
    eig = float(np.linalg.norm(k)) ** 1.5
    np.testing.assert_allclose(apply_fraclap(u, 0.75).values, eig * u.values, atol=1e-12 * eig)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.9])
def test_half_power_composes_to_full_power(small_grid, rng, s):
    u = random_band_limited(small_grid, rng, kmax=40)
    twice = apply_fraclap(apply_fraclap(u, s, 0.5), s, 0.5)
    full = apply_fraclap(u, s, 1.0)
    assert np.max(np.abs(twice.values - full.values)) <= 1e-10 * full.max_abs()


def test_seminorm_matches_operator_pairing(small_grid, rng):
    u = random_band_limited(small_grid, rng, kmax=30)
    s = 0.4
    assert hs_seminorm_sq(u, s) == pytest.approx(inner(apply_fraclap(u, s), u), rel=1e-10)
    assert ws2_norm_sq(u, s) == pytest.approx(u.norm() ** 2 + hs_seminorm_sq(u, s), rel=1e-14)


@pytest.mark.parametrize("eps", [0.5, 2.0])
def test_dilation_scales_by_eps_to_the_2s(small_grid, rng, eps):
    s = 0.35
    u = random_band_limited(small_grid, rng, kmax=30)
    # v(y) = u(eps y) lives on the box of side L/eps with the same samples
    dilated = make_grid(1, small_grid.extent / eps, small_grid.points)
    v = Field(dilated, u.values)
    expected = eps ** (2 * s) * apply_fraclap(u, s).values
    assert np.max(np.abs(apply_fraclap(v, s).values - expected)) <= 1e-12 * np.max(np.abs(expected))


@pytest.mark.parametrize("s", [0.2, 0.7])
def test_operator_is_symmetric(small_grid, rng, s):
    u = random_band_limited(small_grid, rng, kmax=30)
    v = random_band_limited(small_grid, rng, kmax=30)
    lhs = inner(apply_fraclap(u, s), v)
    rhs = inner(u, apply_fraclap(v, s))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_constant_has_zero_seminorm(small_grid):
    u = sample(small_grid, lambda x: np.full_like(x, 2.5))
    assert hs_seminorm_sq(u, 0.5) == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.1, 1.5])
def test_order_outside_unit_interval_is_rejected(s):
    with pytest.raises(ValueError):
        check_order(s)


def test_power_scale_is_restricted(small_grid):
    u = sample(small_grid, np.cos)
    with pytest.raises(ValueError):
        apply_fraclap(u, 0.5, power_scale=0.3)


def test_c_ns_half_order_in_one_dimension():
    assert c_ns_constant(1, 0.5) == pytest.approx(1.0 / math.pi, abs=1e-6)


@pytest.mark.parametrize("dim, s", [(1, 0.25), (1, 0.75), (2, 0.5)])
def test_c_ns_quadrature_matches_closed_form(dim, s):
    assert c_ns_constant(dim, s) == pytest.approx(c_ns_closed_form(dim, s), rel=1e-5)


def test_c_ns_rejects_three_dimensions():
    with pytest.raises(ValueError):
        c_ns_constant(3, 0.5)


def test_periodic_kernel_sums_images():
    d = np.array([0.7, 3.1])
    extent, exponent = 10.0, 2.6
    n = np.arange(-200000, 200001)
    brute = np.sum(np.abs(d[:, None] + n[None, :] * extent) ** -exponent, axis=1)
    np.testing.assert_allclose(periodic_kernel(d, extent, exponent), brute, rtol=1e-6)


@pytest.mark.parametrize("s", [0.25, 0.5])
def test_gagliardo_matches_spectral_seminorm_on_gaussian(s):
    grid = make_grid(1, 40.0, 1024)
    u = sample(grid, lambda x: np.exp(-x ** 2))
    direct = 0.5 * c_ns_closed_form(1, s) * gagliardo_seminorm_sq(u, s)
    assert direct == pytest.approx(hs_seminorm_sq(u, s), rel=0.05)


def test_gagliardo_caps_grid_size():
    grid = make_grid(1, 40.0, 2048)
    u = sample(grid, lambda x: np.exp(-x ** 2))
    with pytest.raises(ValueError):
        gagliardo_seminorm_sq(u, 0.5)
