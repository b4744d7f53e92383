"""Benchmark command — the closed-form case N=1, s=1/2, V=1, f(u)=u^2 with ground state 2/(1+x^2).

Every number checked here is known exactly:
    level pi/2, K = pi, P = 2 pi, int F = pi, tail slope -2, c(omega) = pi omega^2 / 2, C_{1,1/2} = 1/pi.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional

import click
import numpy as np

from fracground.commands.base import RunContext, finish, load_config, prepare, run_options, solve_check
from fracground.commands.sweeps import continuity_check, converged_check, monotone_check
from fracground.config import RunConfig
from fracground.schemas import CheckRecord, PotentialSpec
from fracground.services.evolve import BlowUpError, WaveState, split_step
from fracground.services.fraclap import QuadratureError, c_ns_constant
from fracground.services.nehari import ProjectionError
from fracground.services.solver import (
    POSITIVITY_TOL,
    GroundState,
    default_initial,
    solve_ground_state,
    solve_positive,
    sweep_potential,
)
from fracground.services.verify import (
    benchmark_profile,
    decay_check,
    inputs_digest,
    level_consistency,
    make_check,
    new_report,
    pohozaev_check,
    profile_error,
)

logger = logging.getLogger(__name__)

PROFILE_TOL = 1e-3
LEVEL_TOL = 1e-3
PARTS_RTOL = 1e-3
FAMILY_RTOL = 1e-2
CONSTANT_TOL = 1e-6
MASS_DRIFT_TOL = 1e-12
STANDING_WAVE_TOL = 1e-5

FAMILY_SHIFTS = (0.0, 0.5, 1.0)
CONTINUITY_SHIFTS = (0.0, 0.2, 0.1, 0.05, 0.025)
WAVE_DT = 1e-3
WAVE_STEPS = 10000
WAVE_RECORD_EVERY = 100


def benchmark_config(config: RunConfig) -> RunConfig:
    """Pin the model block to the closed-form case; solver, output and seed settings are kept."""
    return config.model_copy(update={
        "dim": 1, "L": 160.0, "M": 8192, "s": 0.5, "p": 2.0,
        "potential": PotentialSpec(), "weight": 1.0, "positive_mode": False, "epsilon": None, "dealias": False,
    })


def _parts_check(gs: GroundState) -> CheckRecord:
    measured = {"K": 2.0 * gs.energy.kinetic, "P": 2.0 * gs.energy.potential, "int_F": gs.energy.nonlinear}
    exact = {"K": math.pi, "P": 2.0 * math.pi, "int_F": math.pi}
    errors = {k: abs(measured[k] - exact[k]) / exact[k] for k in exact}
    return make_check("energy_parts", inputs_digest("energy_parts", gs.u),
                      {"measured": measured, "exact": exact, "relative_errors": errors},
                      max(errors.values()), PARTS_RTOL)


def _family_check(levels: list[Optional[float]]) -> CheckRecord:
    expected = [0.5 * math.pi * (1.0 + d) ** 2 for d in FAMILY_SHIFTS]
    errors = [abs(c - e) / e if c is not None else math.inf for c, e in zip(levels, expected)]
    return make_check("scaling_family", inputs_digest("scaling_family", list(FAMILY_SHIFTS), levels),
                      {"shifts": list(FAMILY_SHIFTS), "levels": levels, "expected": expected,
                       "relative_errors": errors},
                      max(errors), FAMILY_RTOL, note="c(omega) = pi omega^2 / 2 for V = omega")


def _positivity_check(run: RunContext) -> CheckRecord:
    model = run.model.with_positive_mode()
    start = -default_initial(model)
    digest = inputs_digest("positivity", model, start)
    try:
        gs = solve_positive(model, run.config.solver, initial=start)
    except ProjectionError as exc:
        return make_check("positivity", digest, {"error": str(exc)}, None, POSITIVITY_TOL)
    u_min, u_max = float(np.min(gs.u.values)), float(np.max(gs.u.values))
    return make_check(
        "positivity", digest,
        {"min": u_min, "max": u_max, "level": gs.level, "converged": gs.converged,
         "reflected_start": gs.reflected_start},
        max(0.0, -u_min / u_max) if gs.converged else None, POSITIVITY_TOL,
        note="f+ solve from a sign-flipped start: min u >= -1e-8 max u",
    )


def _wave_checks(run: RunContext, gs: GroundState) -> list[CheckRecord]:
    psi0 = WaveState.from_field(gs.u)
    digest = inputs_digest("standing_wave", run.model, gs.u, WAVE_DT, WAVE_STEPS)
    try:
        _, diag = split_step(run.model, psi0, WAVE_DT, WAVE_STEPS, record_every=WAVE_RECORD_EVERY)
    except BlowUpError as exc:
        return [make_check("standing_wave", digest, {"error": str(exc)}, None, STANDING_WAVE_TOL)]
    run.writer.write_diagnostics("standing_wave", diag)
    mass_drift = diag.max_mass_drift_per_step(WAVE_RECORD_EVERY)
    return [
        make_check("standing_wave", digest,
                   {"max_modulus_drift": diag.max_modulus_drift, "energy_drift": diag.energy_drift(),
                    "final_time": diag.times[-1]},
                   diag.max_modulus_drift, STANDING_WAVE_TOL),
        make_check("mass_drift", digest, {"drift_per_step": mass_drift}, mass_drift, MASS_DRIFT_TOL),
    ]


def _constant_check() -> CheckRecord:
    digest = inputs_digest("c_ns", 1, 0.5)
    try:
        value = c_ns_constant(1, 0.5)
    except QuadratureError as exc:
        return make_check("c_ns", digest, {"error": str(exc)}, None, CONSTANT_TOL)
    return make_check("c_ns", digest, {"value": value, "exact": 1.0 / math.pi},
                      abs(value - 1.0 / math.pi), CONSTANT_TOL, note="C_{1,1/2} = 1/pi")


def register_benchmark_commands(cli: click.Group) -> None:
    """Register benchmark on the CLI group."""

    @cli.command("benchmark")
    @run_options
    @click.pass_context
    def benchmark_cmd(ctx: click.Context, config_path: Optional[Path], out: Optional[str],
                      jobs: Optional[int], seed: Optional[int]) -> None:
        """Solve the closed-form case end to end and check every exact number."""
        config = benchmark_config(load_config(ctx, config_path, out, seed))
        run = prepare(ctx, "benchmark", config_path, out, jobs, seed, config=config)
        model = run.model
        report = new_report("benchmark", model)

        try:
            gs = solve_ground_state(model, run.config.solver)
        except ProjectionError as exc:
            raise click.ClickException(f"Initial guess rejected: {exc}") from exc
        run.writer.write_field("ground_state", gs.u)
        reference = benchmark_profile(model.grid)
        run.writer.write_field("reference", reference)

        report.add(solve_check(run, gs))
        error = profile_error(gs.u, reference)
        report.add(make_check("profile", inputs_digest("profile", gs.u, reference),
                              {"sup_relative_error": error}, error, PROFILE_TOL,
                              note="after centering and sign normalization"))
        report.add(make_check("level", inputs_digest("level", gs.u), {"level": gs.level, "exact": 0.5 * math.pi},
                              abs(gs.level - 0.5 * math.pi), LEVEL_TOL))
        report.add(pohozaev_check(model, gs.u))
        report.add(_parts_check(gs))
        report.add(decay_check(gs.u, -2.0, periodic=True))
        report.add(level_consistency(model, gs, seed=run.config.solver.seed))

        family = sweep_potential(model, FAMILY_SHIFTS, run.config.solver, jobs=run.jobs)
        run.writer.write_sweep("scaling_family", family)
        report.add(converged_check(family))
        report.add(_family_check(family.levels))
        report.add(monotone_check(family))

        # |c(1 + delta) - c(1)| must shrink with delta
        nearby = sweep_potential(model, CONTINUITY_SHIFTS, run.config.solver, jobs=run.jobs)
        run.writer.write_sweep("continuity", nearby)
        report.add(converged_check(nearby, "continuity_converged"))
        report.add(continuity_check(nearby))

        report.add(_positivity_check(run))
        for check in _wave_checks(run, gs):
            report.add(check)
        report.add(_constant_check())

        finish(ctx, run, report, level=gs.level, iterations=gs.iters)
