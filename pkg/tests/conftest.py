"""Shared fixtures: the closed-form benchmark (N=1, s=1/2, V=1, f(u)=u^2) on a reduced grid."""

from __future__ import annotations

import numpy as np
import pytest

from fracground.services.grid import make_grid
from fracground.services.model import make_model
from fracground.services.solver import solve_ground_state
from fracground.services.verify import benchmark_profile

# The profile 2/(1+x^2) is analytic, so M=2048 on L=160 resolves it as well as M=8192;
# the box size is what limits the accuracy.
BENCH_L = 160.0
BENCH_M = 2048


@pytest.fixture(scope="session")
def bench_grid():
    return make_grid(1, BENCH_L, BENCH_M)


@pytest.fixture(scope="session")
def bench_model(bench_grid):
    return make_model(bench_grid, 0.5, 1.0, p=2.0)


@pytest.fixture(scope="session")
def bench_state(bench_model):
    return solve_ground_state(bench_model)


@pytest.fixture(scope="session")
def exact_profile(bench_grid):
    return benchmark_profile(bench_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_grid():
    return make_grid(1, 40.0, 256)
