"""Energy service — the functional J, its L2 gradient, the E^s norm and the Nehari residual."""

from __future__ import annotations

import logging

import numpy as np

from fracground.schemas import EnergyBreakdown
from fracground.services.fraclap import apply_fraclap, hs_seminorm_sq
from fracground.services.grid import Field, Grid, integrate
from fracground.services.model import ModelProblem, eval_F, eval_f

logger = logging.getLogger(__name__)


def potential_term(model: ModelProblem, u: Field) -> float:
    """int V u^2."""
    return float(model.grid.cell_volume * np.sum(model.v_values * u.values ** 2))


def e_norm_sq(model: ModelProblem, u: Field) -> float:
    """||u||_E^2 = int |xi|^2s |u_hat|^2 + int V u^2."""
    return hs_seminorm_sq(u, model.s) + potential_term(model, u)


def nonlinear_pairing(model: ModelProblem, u: Field) -> float:
    """int f(x, u) u."""
    return integrate(eval_f(model, u) * u)


def energy(model: ModelProblem, u: Field) -> EnergyBreakdown:
    kinetic = 0.5 * hs_seminorm_sq(u, model.s)
    potential = 0.5 * potential_term(model, u)
    nonlinear = integrate(eval_F(model, u))
    return EnergyBreakdown.from_parts(kinetic, potential, nonlinear)


def dealias_filter(grid: Grid) -> np.ndarray:
    """2/3-rule mask: keeps modes with |k| < M/3 on every axis."""
    keep = np.abs(grid.mode_numbers) < grid.points / 3.0
    if grid.dim == 1:
        return keep
    return np.logical_and.outer(keep, keep)


def _nonlinear_term(model: ModelProblem, u: Field) -> Field:
    f = eval_f(model, u)
    if not model.dealias:
        return f
    grid = model.grid
    filtered = grid.backward(grid.forward(f.values) * dealias_filter(grid))
    return Field(grid, filtered.real)


def gradient(model: ModelProblem, u: Field) -> Field:
    """L2 gradient g = (-Delta)^s u + V u - f(x, u), so that DJ(u) v = int g v."""
    g = apply_fraclap(u, model.s, 1.0).values + model.v_values * u.values - _nonlinear_term(model, u).values
    return Field(u.grid, g)


def nehari_residual(model: ModelProblem, u: Field) -> float:
    """G(u) = ||u||_E^2 - int f(x, u) u = DJ(u) u."""
    return e_norm_sq(model, u) - nonlinear_pairing(model, u)
