"""Verify command — identity, decay, level and inequality suites on a computed or supplied ground state."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional

import click

from fracground.commands.base import RunContext, finish, prepare, run_options, solve_check
from fracground.schemas import CheckName, CheckRecord
from fracground.services.nehari import ProjectionError, level_estimate
from fracground.services.solver import GroundState, assess, solve_ground_state, solve_positive
from fracground.services.verify import (
    commutator_check,
    concentration_check,
    cutoff,
    cutoff_check,
    decay_check,
    empirical_check,
    gn_check,
    inputs_digest,
    level_consistency,
    make_check,
    new_report,
    pohozaev_check,
    random_fields,
    sobolev_check,
)
from fracground.services.writer import read_field_csv

logger = logging.getLogger(__name__)

LEVEL_ESTIMATE_RTOL = 1e-6
CONCENTRATION_FRACTION = 0.5


def load_ground_state(run: RunContext) -> GroundState:
    """The field named by verify.field (judged by the solver tolerances), or a fresh solve."""
    cfg = run.config
    if cfg.verify.field:
        try:
            u = read_field_csv(Path(cfg.verify.field))
        except (OSError, ValueError) as exc:
            raise click.ClickException(f"Cannot read field {cfg.verify.field}: {exc}") from exc
        if u.grid != run.model.grid:
            raise click.ClickException(
                f"Field grid {u.grid.describe()} does not match the model grid {run.model.grid.describe()}"
            )
        try:
            return assess(run.model, u, cfg.solver)
        except ValueError as exc:
            raise click.ClickException(str(exc)) from exc
    try:
        if run.model.positive_mode:
            return solve_positive(run.model, cfg.solver)
        return solve_ground_state(run.model, cfg.solver)
    except ProjectionError as exc:
        raise click.ClickException(f"Initial guess rejected: {exc}") from exc


def level_estimate_check(run: RunContext, gs: GroundState, seed: int) -> CheckRecord:
    starts = run.config.verify.level_starts
    digest = inputs_digest("level_estimate", run.model, gs.u, seed, starts)
    if not gs.converged:
        return make_check("level_estimate", digest, {"level": gs.level}, None, LEVEL_ESTIMATE_RTOL,
                          applicable=False, note="not applicable: ground state did not converge")
    estimate = level_estimate(run.model, starts, seed, run.config.solver, jobs=run.jobs)
    return make_check(
        "level_estimate", digest, {"level": gs.level, **estimate.model_dump()},
        abs(estimate.level - gs.level) / abs(gs.level), LEVEL_ESTIMATE_RTOL,
        note="multi-start minimum agrees with the ground-state level",
    )


def register_verify_commands(cli: click.Group) -> None:
    """Register verify on the CLI group."""

    @cli.command("verify")
    @run_options
    @click.pass_context
    def verify_cmd(ctx: click.Context, config_path: Optional[Path], out: Optional[str],
                   jobs: Optional[int], seed: Optional[int]) -> None:
        """Run the suites listed in verify.checks against the ground state."""
        run = prepare(ctx, "verify", config_path, out, jobs, seed)
        model, vcfg = run.model, run.config.verify
        grid, s = model.grid, model.s
        run_seed = run.config.solver.seed
        selected = set(vcfg.checks)

        gs = load_ground_state(run)
        u = gs.u
        run.writer.write_field("verified_field", u)

        report = new_report("verify", model)
        report.add(solve_check(run, gs))

        if CheckName.POHOZAEV in selected:
            report.add(pohozaev_check(model, u))
        if CheckName.DECAY in selected:
            expected = -(grid.dim + 2.0 * s)
            try:
                report.add(decay_check(u, expected, window=vcfg.decay_window, periodic=vcfg.decay_periodic))
            except ValueError as exc:
                report.add(make_check("decay", inputs_digest("decay", u), {"expected": expected}, None, 0.1,
                                      applicable=False, note=f"not applicable: {exc}"))
        if CheckName.LEVEL in selected:
            report.add(level_consistency(model, gs, seed=run_seed))
            report.add(level_estimate_check(run, gs, run_seed))
        if CheckName.CUTOFF in selected:
            report.add(cutoff_check(u, vcfg.radii, s))
        if CheckName.CONCENTRATION in selected:
            floor = CONCENTRATION_FRACTION * u.norm() ** 2
            report.add(concentration_check(u, vcfg.concentration_radius, floor))

        empirical = selected & {CheckName.GN, CheckName.SOBOLEV, CheckName.COMMUTATOR}
        if empirical:
            fields = random_fields(grid, vcfg.samples, run_seed)
            base = ("fields", grid.describe(), vcfg.samples, run_seed, s)
            if CheckName.GN in empirical:
                try:
                    report.add(empirical_check("gn", gn_check(fields, s, vcfg.q), inputs_digest(*base, vcfg.q)))
                except ValueError as exc:
                    report.add(_not_applicable("gn", base, exc))
            if CheckName.SOBOLEV in empirical:
                try:
                    report.add(empirical_check("sobolev", sobolev_check(fields, s), inputs_digest(*base)))
                except ValueError as exc:
                    report.add(_not_applicable("sobolev", base, exc))
            if CheckName.COMMUTATOR in empirical:
                phi = cutoff(grid, vcfg.commutator_radius)
                constant = commutator_check(phi, fields, s)
                report.add(empirical_check("commutator", constant,
                                           inputs_digest(*base, vcfg.commutator_radius)))

        finish(ctx, run, report, level=gs.level if math.isfinite(gs.level) else None,
               checks=[c.value for c in vcfg.checks], supplied_field=vcfg.field)


def _not_applicable(name: str, base: tuple, exc: Exception) -> CheckRecord:
    return make_check(name, inputs_digest(*base), {}, None, 0.1, applicable=False, note=f"not applicable: {exc}")
