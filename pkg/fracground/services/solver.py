"""Solver service — Nehari-constrained descent for ground states, positive mode and parameter sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.sparse import linalg as spla

from fracground.schemas import (
    Branch,
    EnergyBreakdown,
    GroundStateSummary,
    InfinityComparison,
    SolverConfig,
    SweepPoint,
    SweepResult,
    constant_potential,
)
from fracground.services.energy import e_norm_sq, energy, gradient, nehari_residual
from fracground.services.grid import Field, gaussian_bump, inner, integrate, shift
from fracground.services.model import V2, V5, ModelProblem, Potential, blocking_failures, validate
from fracground.services.nehari import ProjectionError, project

logger = logging.getLogger(__name__)

COLLAPSE_NORM = 1e-10
POSITIVITY_TOL = 1e-8
ROUNDOFF_SLACK = 64 * np.finfo(float).eps
BRANCH_RTOL = 1e-6


@dataclass(frozen=True)
class GroundState:
    u: Field
    level: float
    grad_norm: float
    nehari_res: float
    iters: int
    converged: bool
    energy: EnergyBreakdown
    message: str = ""
    positivity_ok: Optional[bool] = None
    reflected_start: bool = False
    descent_monotone: bool = True
    history: tuple[float, ...] = field(default=(), repr=False)

    def summary(self) -> GroundStateSummary:
        return GroundStateSummary(
            level=self.level, grad_norm=self.grad_norm, nehari_res=self.nehari_res, iters=self.iters,
            converged=self.converged, message=self.message, positivity_ok=self.positivity_ok,
            reflected_start=self.reflected_start, descent_monotone=self.descent_monotone,
        )


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------

def default_initial(model: ModelProblem) -> Field:
    """Unit-mass Gaussian of width 1 at the origin."""
    return gaussian_bump(model.grid, width=1.0, mass=1.0)


def normalize_sign(u: Field) -> Field:
    """Flip so that int u^3 >= 0."""
    return -u if integrate(u.map(lambda v: v ** 3)) < 0 else u


def center(u: Field) -> Field:
    """Translate so the peak of |u| sits at the origin (parabolic sub-grid interpolation)."""
    grid = u.grid
    values = u.values
    peak = np.unravel_index(int(np.argmax(np.abs(values))), grid.shape)
    offsets = []
    for axis in range(grid.dim):
        line = values[tuple(slice(None) if a == axis else peak[a] for a in range(grid.dim))]
        i = peak[axis]
        left, mid, right = line[(i - 1) % grid.points], line[i], line[(i + 1) % grid.points]
        denom = left - 2.0 * mid + right
        delta = 0.5 * (left - right) / denom if denom != 0 else 0.0
        offsets.append(float(grid.axis[i] + delta * grid.spacing))
    return shift(u, tuple(offsets))


class RieszDirection:
    """d = ((-Delta)^s + V)^-1 g: the E^s representative of the L2 gradient."""

    def __init__(self, model: ModelProblem, config: SolverConfig) -> None:
        grid = model.grid
        self._shape = grid.shape
        self._symbol = grid.symbol(2.0 * model.s)
        self._v = model.v_values
        self._constant = model.potential.is_constant
        v_mean = float(np.mean(self._v))
        self._inverse = 1.0 / (self._symbol + (float(self._v.flat[0]) if self._constant else v_mean))
        self._rtol = config.cg_rtol
        self._maxiter = config.cg_maxiter
        if not self._constant:
            n = grid.size
            self._operator = spla.LinearOperator((n, n), matvec=self._apply, dtype=float)
            self._preconditioner = spla.LinearOperator((n, n), matvec=self._precondition, dtype=float)

    def _multiply(self, x: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
        return np.real(sfft.ifftn(multiplier * sfft.fftn(x)))

    def _apply(self, x: np.ndarray) -> np.ndarray:
        x = x.reshape(self._shape)
        return (self._multiply(x, self._symbol) + self._v * x).ravel()

    def _precondition(self, x: np.ndarray) -> np.ndarray:
        return self._multiply(x.reshape(self._shape), self._inverse).ravel()

    def __call__(self, g: Field) -> Field:
        if self._constant:
            return Field(g.grid, self._multiply(g.values, self._inverse))
        d, info = spla.cg(self._operator, g.values.ravel(), rtol=self._rtol, maxiter=self._maxiter,
                          M=self._preconditioner)
        if info != 0:
            logger.warning("Riesz CG stopped without reaching rtol=%g (info=%d)", self._rtol, info)
        return Field(g.grid, d.reshape(self._shape))


# ----------------------------------------------------------------------
# Descent
# ----------------------------------------------------------------------

def _descend(model: ModelProblem, config: SolverConfig, u0: Field) -> GroundState:
    proj = project(model, u0)
    u, level = proj.projected, proj.fiber_value
    riesz = RieszDirection(model, config)
    history = [level]
    monotone = True
    converged = False
    message = "iteration limit reached"
    grad_norm = math.inf
    iters = 0

    for iters in range(1, config.max_iters + 1):
        norm_e_sq = e_norm_sq(model, u)
        if math.sqrt(max(norm_e_sq, 0.0)) < COLLAPSE_NORM:
            message = "collapse: ||u||_E fell below threshold"
            break
        g = gradient(model, u)
        grad_norm = g.norm() / u.norm()
        residual = nehari_residual(model, u)
        if grad_norm <= config.tol_grad and abs(residual) <= config.tol_nehari * norm_e_sq:
            converged = True
            message = "converged"
            break

        d = riesz(g)
        slope = inner(g, d)
        if not slope > 0:
            d, slope = g, inner(g, g)
        slack = ROUNDOFF_SLACK * (norm_e_sq - level + abs(level))

        step = config.step0
        trial = None
        while step >= config.min_step * config.step0:
            try:
                candidate = project(model, u - step * d)
            except ProjectionError:
                step *= config.backtrack
                continue
            if candidate.fiber_value <= level - config.armijo * step * slope + slack:
                trial = candidate
                break
            step *= config.backtrack
        if trial is None:
            message = "line search stalled"
            break

        if trial.fiber_value > level + slack:
            monotone = False
        u, level = trial.projected, trial.fiber_value
        history.append(level)
        if iters % 100 == 0:
            logger.debug("iter %d: J=%.15g |g|/|u|=%.3e step=%.3g", iters, level, grad_norm, step)

    if not model.positive_mode:
        u = normalize_sign(u)
    breakdown = energy(model, u)
    norm_e_sq = e_norm_sq(model, u)
    gs = GroundState(
        u=u, level=breakdown.total, grad_norm=float(grad_norm), nehari_res=float(nehari_residual(model, u)),
        iters=iters, converged=converged, energy=breakdown, message=message,
        descent_monotone=monotone, history=tuple(history),
    )
    log = logger.info if converged else logger.warning
    log("Solve %s after %d iterations: c=%.12g |g|/|u|=%.3e G/||u||_E^2=%.3e",
        message, iters, gs.level, gs.grad_norm, gs.nehari_res / max(norm_e_sq, np.finfo(float).tiny))
    return gs


def solve_ground_state(
    model: ModelProblem, config: Optional[SolverConfig] = None, initial: Optional[Field] = None,
) -> GroundState:
    """Ground state by projected descent: u <- project(u - tau d) with Armijo backtracking on J.

    Raises ProjectionError when the initial guess cannot be projected (e.g. u = 0).
    """
    config = config or SolverConfig()
    u0 = initial if initial is not None else default_initial(model)
    return _descend(model, config, u0)


def solve_positive(
    model: ModelProblem, config: Optional[SolverConfig] = None, initial: Optional[Field] = None,
) -> GroundState:
    """Ground state of the f+ problem, with a numerical maximum-principle post-check."""
    if not model.positive_mode:
        raise ValueError("solve_positive needs a model with positive_mode enabled")
    config = config or SolverConfig()
    u0 = initial if initial is not None else default_initial(model)
    if u0.max_abs() == 0:
        raise ProjectionError("Cannot project the zero field onto the Nehari manifold")
    reflected = bool(np.max(u0.values) <= 0)
    if reflected:
        # f+ vanishes on a non-positive field, so its ray never reaches the manifold
        logger.info("Initial guess has no positive part; starting from its reflection")
        u0 = -u0

    gs = _descend(model, config, u0)
    u = gs.u
    positivity_ok = bool(np.min(u.values) >= -POSITIVITY_TOL * np.max(u.values))
    if not positivity_ok:
        logger.warning("Positivity post-check failed: min u=%.3e, max u=%.3e",
                       float(np.min(u.values)), float(np.max(u.values)))
    message = gs.message if positivity_ok else f"{gs.message}; positivity post-check failed"
    return GroundState(
        u=u, level=gs.level, grad_norm=gs.grad_norm, nehari_res=gs.nehari_res, iters=gs.iters,
        converged=gs.converged, energy=gs.energy, message=message, positivity_ok=positivity_ok,
        reflected_start=reflected, descent_monotone=gs.descent_monotone, history=gs.history,
    )


def assess(model: ModelProblem, u: Field, config: Optional[SolverConfig] = None) -> GroundState:
    """Wrap a supplied field as a GroundState, judged by the solver tolerances (no iterations)."""
    if u.max_abs() == 0:
        raise ValueError("Cannot assess the zero field")
    config = config or SolverConfig()
    breakdown = energy(model, u)
    norm_e_sq = e_norm_sq(model, u)
    grad_norm = gradient(model, u).norm() / u.norm()
    residual = nehari_residual(model, u)
    converged = grad_norm <= config.tol_grad and abs(residual) <= config.tol_nehari * norm_e_sq
    return GroundState(
        u=u, level=breakdown.total, grad_norm=grad_norm, nehari_res=residual, iters=0,
        converged=converged, energy=breakdown, message="supplied field",
    )


# ----------------------------------------------------------------------
# Problem at infinity
# ----------------------------------------------------------------------

def model_at_infinity(model: ModelProblem) -> ModelProblem:
    v_inf = model.potential.v_inf
    if not math.isfinite(v_inf):
        raise ValueError("The problem at infinity needs a finite Vinf")
    return model.with_potential(Potential(constant_potential(v_inf)))


def _branch(level: float, level_inf: float) -> Branch:
    return Branch.CRITICAL if level < level_inf - BRANCH_RTOL * abs(level_inf) else Branch.THRESHOLD


def compare_with_infinity(model: ModelProblem, config: Optional[SolverConfig] = None) -> InfinityComparison:
    """c, c_inf and the test-function bound J(phi(w) w) built from the ground state w at infinity."""
    config = config or SolverConfig()
    gs = solve_ground_state(model, config)
    gs_inf = solve_ground_state(model_at_infinity(model), config)
    proj = project(model, gs_inf.u)
    w = proj.projected
    gap = 0.5 * integrate(Field(w.grid, (model.potential.v_inf - model.v_values) * w.values ** 2))
    comparison = InfinityComparison(
        level=gs.level, level_at_infinity=gs_inf.level, upper_bound=proj.fiber_value, gap=gap,
        branch=_branch(gs.level, gs_inf.level),
    )
    logger.info("c=%.10g c_inf=%.10g bound=%.10g gap=%.3e -> %s", comparison.level,
                comparison.level_at_infinity, comparison.upper_bound, gap, comparison.branch.value)
    return comparison


# ----------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------

def _solve_point(
    index: int, model: ModelProblem, config: SolverConfig, extra_required: tuple[str, ...],
) -> tuple[int, Optional[GroundState], Optional[str]]:
    failures = blocking_failures(validate(model, extra_required=extra_required))
    if failures:
        names = ", ".join(f"{c.name} (witness {c.witness})" for c in failures)
        return index, None, f"assumptions failed: {names}"
    try:
        return index, solve_ground_state(model, config), None
    except (ProjectionError, ValueError) as exc:
        return index, None, str(exc)


def _run_points(
    models: Sequence[ModelProblem], config: SolverConfig, jobs: int, extra_required: tuple[str, ...] = (),
) -> list[tuple[int, Optional[GroundState], Optional[str]]]:
    if jobs > 1 and len(models) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(models))) as pool:
            futures = [pool.submit(_solve_point, i, m, config, extra_required) for i, m in enumerate(models)]
            results = [f.result() for f in futures]
    else:
        results = [_solve_point(i, m, config, extra_required) for i, m in enumerate(models)]
    return sorted(results, key=lambda r: r[0])


def _assemble(
    parameter_name: str, parameters: Sequence[float],
    results: list[tuple[int, Optional[GroundState], Optional[str]]],
) -> SweepResult:
    points = []
    for (index, gs, error), param in zip(results, parameters):
        points.append(SweepPoint(
            index=index, parameter=float(param), level=gs.level if gs else None,
            converged=bool(gs and gs.converged), summary=gs.summary() if gs else None, error=error,
        ))
        if error:
            logger.warning("Sweep point %s=%g failed: %s", parameter_name, param, error)
        else:
            logger.info("Sweep point %s=%g: c=%.12g (converged=%s)", parameter_name, param, gs.level, gs.converged)
    result = SweepResult(
        parameter_name=parameter_name, parameters=[float(p) for p in parameters],
        levels=[p.level for p in points], converged=[p.converged for p in points], points=points,
    )
    result._states = [gs for _, gs, _ in results]
    return result


def sweep_potential(
    model: ModelProblem,
    shifts: Iterable[float],
    config: Optional[SolverConfig] = None,
    jobs: int = 1,
    base: Optional[Potential] = None,
) -> SweepResult:
    """Levels c(V + delta) for each shift delta; failed points are recorded and the sweep continues."""
    config = config or SolverConfig()
    base = base or model.potential
    shifts = [float(d) for d in shifts]
    models = [model.with_potential(base.shifted(d)) for d in shifts]
    return _assemble("shift", shifts, _run_points(models, config, jobs))


def sweep_epsilon(
    model: ModelProblem,
    epsilons: Iterable[float],
    config: Optional[SolverConfig] = None,
    jobs: int = 1,
) -> SweepResult:
    """Levels c_eps for V(eps x), compared with the level c_inf of the constant-Vinf problem."""
    config = config or SolverConfig()
    epsilons = [float(e) for e in epsilons]
    if any(e <= 0 for e in epsilons):
        raise ValueError(f"epsilons must be positive, got {epsilons}")
    level_inf = solve_ground_state(model_at_infinity(model), config).level
    models = [model.with_potential(model.potential.rescaled(e)) for e in epsilons]
    result = _assemble("epsilon", epsilons, _run_points(models, config, jobs, extra_required=(V2, V5)))
    result.reference_level = level_inf
    result.margins = [level_inf - c if c is not None else None for c in result.levels]
    result.branches = [_branch(c, level_inf) if c is not None else None for c in result.levels]
    logger.info("c_inf=%.12g; margins %s", level_inf, ["n/a" if m is None else f"{m:.6g}" for m in result.margins])
    return result
