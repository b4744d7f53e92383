"""Nehari service — projection onto the Nehari manifold, fibering maximum and level estimates."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from fracground.schemas import LevelEstimate, SolverConfig
from fracground.services.energy import e_norm_sq
from fracground.services.grid import Field, gaussian_bump, integrate
from fracground.services.model import ModelProblem, eval_F, eval_f, eval_fprime

logger = logging.getLogger(__name__)

T_MIN = 1e-12
T_MAX = 1e12


class ProjectionError(ValueError):
    """The ray t -> t u does not cross the Nehari manifold."""


@dataclass(frozen=True)
class ProjectionResult:
    t_star: float
    projected: Field
    fiber_value: float
    iterations: int


# ----------------------------------------------------------------------
# Fiber map
# ----------------------------------------------------------------------

def _fiber_slope(model: ModelProblem, u: Field, norm_sq: float, t: float) -> float:
    """h(t)/t = ||u||_E^2 - int f(x, t u) u / t."""
    return norm_sq - integrate(eval_f(model, t * u) * u) / t


def fiber_profile(model: ModelProblem, u: Field, thetas: np.ndarray) -> np.ndarray:
    """J(theta u) for each theta, reusing ||u||_E^2."""
    norm_sq = e_norm_sq(model, u)
    return np.array([0.5 * th * th * norm_sq - integrate(eval_F(model, th * u)) for th in thetas])


def closed_form_scale(model: ModelProblem, u: Field) -> float:
    """(||u||_E^2 / int a |u|^(p+1))^(1/(p-1)) for the homogeneous power family."""
    denom = integrate(eval_f(model, u) * u)
    if denom <= 0:
        raise ProjectionError("Nonlinear pairing is not positive; no closed-form projection")
    return (e_norm_sq(model, u) / denom) ** (1.0 / (model.p - 1.0))


def _bracket(model: ModelProblem, u: Field, norm_sq: float) -> tuple[float, float, int]:
    t, evals = 1.0, 1
    if _fiber_slope(model, u, norm_sq, t) > 0:
        while True:
            t_next = 2.0 * t
            evals += 1
            if t_next > T_MAX:
                raise ProjectionError(f"No sign change of the fiber derivative up to t={T_MAX:g}")
            if _fiber_slope(model, u, norm_sq, t_next) <= 0:
                return t, t_next, evals
            t = t_next
    while True:
        t_next = 0.5 * t
        evals += 1
        if t_next < T_MIN:
            raise ProjectionError(f"No sign change of the fiber derivative down to t={T_MIN:g}")
        if _fiber_slope(model, u, norm_sq, t_next) > 0:
            return t_next, t, evals
        t = t_next


def project(model: ModelProblem, u: Field) -> ProjectionResult:
    """Scale u onto the Nehari manifold: the unique root t > 0 of h(t) = DJ(t u) u."""
    norm_sq = e_norm_sq(model, u)
    if norm_sq <= 0 or u.max_abs() == 0:
        raise ProjectionError("Cannot project the zero field onto the Nehari manifold")

    lo, hi, evals = _bracket(model, u, norm_sq)
    t_star, info = optimize.brentq(
        lambda t: _fiber_slope(model, u, norm_sq, t), lo, hi,
        xtol=1e-300, rtol=1e-14, maxiter=500, full_output=True,
    )
    iterations = evals + info.iterations

    # one Newton polish on h(t) = t * slope(t)
    h = t_star * _fiber_slope(model, u, norm_sq, t_star)
    dh = norm_sq - integrate(eval_fprime(model, t_star * u) * u * u)
    if dh != 0 and math.isfinite(dh):
        candidate = t_star - h / dh
        if candidate > 0 and abs(candidate * _fiber_slope(model, u, norm_sq, candidate)) < abs(h):
            t_star = candidate
    iterations += 1

    projected = t_star * u
    fiber_value = 0.5 * t_star * t_star * norm_sq - integrate(eval_F(model, projected))
    logger.debug("Projection: t*=%.15g after %d evaluations, J=%.15g", t_star, iterations, fiber_value)
    return ProjectionResult(t_star=float(t_star), projected=projected, fiber_value=float(fiber_value),
                            iterations=iterations)


def fibering_max(model: ModelProblem, u: Field) -> float:
    """max_{theta >= 0} J(theta u) = J(phi(u) u)."""
    return project(model, u).fiber_value


# ----------------------------------------------------------------------
# Multi-start level estimate
# ----------------------------------------------------------------------

def initial_bump(model: ModelProblem, seed: int, index: int) -> Field:
    """Seeded Gaussian: center uniform in the middle half of the box, width in [1, L/10], unit mass."""
    grid = model.grid
    rng = np.random.default_rng([seed, index])
    center = tuple(rng.uniform(-0.25 * grid.extent, 0.25 * grid.extent, size=grid.dim))
    width = rng.uniform(1.0, max(1.0, 0.1 * grid.extent))
    return gaussian_bump(grid, center=center, width=width, mass=1.0)


def _run_start(model: ModelProblem, config: SolverConfig, seed: int, index: int):
    from fracground.services.solver import solve_ground_state

    return solve_ground_state(model, config, initial=initial_bump(model, seed, index))


def level_estimate(
    model: ModelProblem,
    starts: int,
    seed: int,
    config: Optional[SolverConfig] = None,
    jobs: int = 1,
) -> LevelEstimate:
    """Upper bound on c: the lowest converged level over `starts` seeded solver runs."""
    if starts < 1:
        raise ValueError(f"starts must be >= 1, got {starts}")
    config = config or SolverConfig(seed=seed)

    if jobs > 1 and starts > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, starts)) as pool:
            futures = [pool.submit(_run_start, model, config, seed, i) for i in range(starts)]
            states = [f.result() for f in futures]
    else:
        states = [_run_start(model, config, seed, i) for i in range(starts)]

    levels = [gs.level for gs in states]
    converged = [i for i, gs in enumerate(states) if gs.converged]
    pool_idx = converged or list(range(starts))
    best = min(pool_idx, key=lambda i: (levels[i], i))
    non_converged = starts - len(converged)
    if non_converged:
        logger.warning("Level estimate: %d of %d starts did not converge", non_converged, starts)
    logger.info("Level estimate over %d starts: c <= %.12g (start %d)", starts, levels[best], best)
    return LevelEstimate(level=levels[best], best_index=best, levels=levels, non_converged=non_converged)
