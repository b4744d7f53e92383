"""Sweep commands — levels under potential shifts and under the slow-variation rescaling V(eps x)."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import click

from fracground.commands.base import RunContext, finish, prepare, run_options
from fracground.schemas import CheckRecord, SweepResult
from fracground.services.model import V2, V5
from fracground.services.solver import sweep_epsilon, sweep_potential
from fracground.services.verify import inputs_digest, make_check, new_report, singular_perturbation_residual

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-6
RESCALING_TOL = 1e-6


# ----------------------------------------------------------------------
# Checks shared by both sweeps
# ----------------------------------------------------------------------

def converged_check(sweep: SweepResult, name: str = "sweep_converged") -> CheckRecord:
    failed = [p.index for p in sweep.points if not p.converged]
    return make_check(
        name, inputs_digest(name, sweep.parameters, sweep.levels),
        {"parameters": sweep.parameters, "converged": sweep.converged,
         "errors": [p.error for p in sweep.points], "failed_indices": failed},
        float(len(failed)), 0.0,
    )


def monotonicity_violation(parameters: list[float], levels: list[Optional[float]]) -> float:
    """Largest drop of the level along increasing parameter, ignoring failed points."""
    pairs = sorted((p, c) for p, c in zip(parameters, levels) if c is not None)
    drops = [a - b for (_, a), (_, b) in zip(pairs, pairs[1:])]
    return max([0.0] + drops)


def monotone_check(sweep: SweepResult) -> CheckRecord:
    violation = monotonicity_violation(sweep.parameters, sweep.levels)
    return make_check(
        "monotone", inputs_digest("monotone", sweep.parameters, sweep.levels),
        {"parameters": sweep.parameters, "levels": sweep.levels, "largest_drop": violation},
        violation, MONOTONE_SLACK,
    )


def continuity_check(sweep: SweepResult) -> CheckRecord:
    """|c(p) - c(p0)| shrinks as p approaches the base parameter p0 (first entry) from either side."""
    base_p, base_c = sweep.parameters[0], sweep.levels[0]
    digest = inputs_digest("continuity", sweep.parameters, sweep.levels)
    if base_c is None:
        return make_check("continuity", digest, {}, None, 0.0, applicable=False,
                          note="not applicable: base point failed")
    violations = 0
    gaps: dict[str, list[list[float]]] = {"above": [], "below": []}
    for side, keep in (("above", lambda d: d > 0), ("below", lambda d: d < 0)):
        pairs = sorted((abs(p - base_p), abs(c - base_c)) for p, c in zip(sweep.parameters, sweep.levels)
                       if c is not None and keep(p - base_p))
        gaps[side] = [list(pair) for pair in pairs]
        violations += sum(1 for (_, a), (_, b) in zip(pairs, pairs[1:]) if b < a)
    return make_check(
        "continuity", digest,
        {"base_parameter": base_p, "gaps": gaps, "continuity_constant": sweep.continuity_constant(0)},
        float(violations), 0.0, note="|c(p) - c(p0)| nondecreasing in |p - p0| on each side",
    )


def _write_states(run: RunContext, prefix: str, sweep: SweepResult) -> None:
    for index, gs in enumerate(sweep.states):
        if gs is not None:
            run.writer.write_field(f"{prefix}_{index:03d}", gs.u)


def register_sweep_commands(cli: click.Group) -> None:
    """Register sweep-potential and sweep-eps on the CLI group."""

    @cli.command("sweep-potential")
    @run_options
    @click.pass_context
    def sweep_potential_cmd(ctx: click.Context, config_path: Optional[Path], out: Optional[str],
                            jobs: Optional[int], seed: Optional[int]) -> None:
        """Levels c(V + delta) for sweep.shifts; checks convergence, monotonicity and continuity."""
        run = prepare(ctx, "sweep-potential", config_path, out, jobs, seed)
        shifts = run.config.sweep.shifts
        if not shifts:
            raise click.ClickException("sweep.shifts is empty")
        sweep = sweep_potential(run.model, shifts, run.config.solver, jobs=run.jobs)
        run.writer.write_sweep("sweep_potential", sweep)
        _write_states(run, "shift", sweep)

        report = new_report("sweep-potential", run.model)
        report.add(converged_check(sweep))
        report.add(monotone_check(sweep))
        report.add(continuity_check(sweep))
        finish(ctx, run, report, parameters=sweep.parameters, levels=sweep.levels,
               monotone=sweep.is_monotone(MONOTONE_SLACK))

    @cli.command("sweep-eps")
    @run_options
    @click.pass_context
    def sweep_eps_cmd(ctx: click.Context, config_path: Optional[Path], out: Optional[str],
                      jobs: Optional[int], seed: Optional[int]) -> None:
        """Levels c_eps for V(eps x) against c_inf; checks the margin at the smallest eps and the rescaling."""
        run = prepare(ctx, "sweep-eps", config_path, out, jobs, seed, extra_required=(V2, V5))
        epsilons = run.config.sweep.epsilons
        if not epsilons or any(e <= 0 for e in epsilons):
            raise click.ClickException(f"sweep.epsilons must be a non-empty list of positive numbers, got {epsilons}")
        sweep = sweep_epsilon(run.model, epsilons, run.config.solver, jobs=run.jobs)
        run.writer.write_sweep("sweep_eps", sweep)
        _write_states(run, "eps", sweep)

        report = new_report("sweep-eps", run.model)
        report.add(converged_check(sweep))

        smallest = min(range(len(epsilons)), key=lambda i: epsilons[i])
        margin = sweep.margins[smallest]
        margin_digest = inputs_digest("margin", sweep.parameters, sweep.levels, sweep.reference_level)
        if margin is None:
            report.add(make_check("margin", margin_digest, {"epsilon": epsilons[smallest]}, None, 0.0,
                                  applicable=False, note="not applicable: smallest-epsilon point failed"))
        else:
            report.add(make_check(
                "margin", margin_digest,
                {"epsilon": epsilons[smallest], "level": sweep.levels[smallest],
                 "level_at_infinity": sweep.reference_level, "margin": margin,
                 "branches": [b.value if b else None for b in sweep.branches]},
                -margin, 0.0, note="c_inf - c_eps at the smallest epsilon must be positive",
            ))

        residuals = []
        for eps, gs in zip(epsilons, sweep.states):
            if gs is None or not gs.converged:
                continue
            model = run.model.with_potential(run.model.potential.rescaled(eps))
            residuals.append(singular_perturbation_residual(model, gs))
        report.add(make_check(
            "rescaling", inputs_digest("rescaling", sweep.parameters, sweep.levels),
            {"epsilons": epsilons, "residuals": residuals},
            max(residuals) if residuals else None, RESCALING_TOL,
            applicable=bool(residuals), note="eps^2s (-Delta)^s v + V(y) v = f(v) for v(y) = u(y/eps)",
        ))
        finish(ctx, run, report, parameters=sweep.parameters, levels=sweep.levels,
               level_at_infinity=sweep.reference_level, margins=sweep.margins,
               nondecreasing_in_epsilon=sweep.is_monotone(MONOTONE_SLACK))
