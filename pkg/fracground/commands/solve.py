"""Solve commands — ground state, positive ground state and the assumption table."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import click
import numpy as np

from fracground.commands.base import build_model, finish, load_config, prepare, run_options, solve_check
from fracground.services.model import blocking_failures, validate
from fracground.services.nehari import ProjectionError
from fracground.services.solver import POSITIVITY_TOL, solve_ground_state, solve_positive
from fracground.services.verify import inputs_digest, make_check, new_report

logger = logging.getLogger(__name__)


def register_solve_commands(cli: click.Group) -> None:
    """Register solve, solve-positive and validate on the CLI group."""

    @cli.command("solve")
    @run_options
    @click.pass_context
    def solve(ctx: click.Context, config_path: Optional[Path], out: Optional[str],
              jobs: Optional[int], seed: Optional[int]) -> None:
        """Compute a ground state by Nehari-constrained descent.

        Writes fields/ground_state.csv and report.json; exits 2 if the solver does not converge.
        """
        run = prepare(ctx, "solve", config_path, out, jobs, seed)
        try:
            gs = solve_ground_state(run.model, run.config.solver)
        except ProjectionError as exc:
            raise click.ClickException(f"Initial guess rejected: {exc}") from exc
        run.writer.write_field("ground_state", gs.u)

        report = new_report("solve", run.model)
        report.add(solve_check(run, gs))
        finish(ctx, run, report, level=gs.level, iterations=gs.iters)

    @cli.command("solve-positive")
    @run_options
    @click.pass_context
    def solve_positive_cmd(ctx: click.Context, config_path: Optional[Path], out: Optional[str],
                           jobs: Optional[int], seed: Optional[int]) -> None:
        """Ground state of the f+ problem with the positivity post-check."""
        run = prepare(ctx, "solve-positive", config_path, out, jobs, seed, positive_mode=True)
        try:
            gs = solve_positive(run.model, run.config.solver)
        except ProjectionError as exc:
            raise click.ClickException(f"Initial guess rejected: {exc}") from exc
        run.writer.write_field("ground_state_positive", gs.u)

        report = new_report("solve-positive", run.model)
        report.add(solve_check(run, gs))
        u_min, u_max = float(np.min(gs.u.values)), float(np.max(gs.u.values))
        report.add(make_check(
            "positivity", inputs_digest("positivity", gs.u),
            {"min": u_min, "max": u_max, "reflected_start": gs.reflected_start},
            max(0.0, -u_min / u_max), POSITIVITY_TOL, note="min u >= -1e-8 max u",
        ))
        finish(ctx, run, report, level=gs.level, iterations=gs.iters)

    @cli.command("validate")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
    @click.pass_context
    def validate_cmd(ctx: click.Context, config_path: Optional[Path]) -> None:
        """Print the assumption table; exit 1 if a required assumption fails."""
        config = load_config(ctx, config_path, None, None)
        try:
            model = build_model(config)
        except ValueError as exc:
            raise click.ClickException(f"Invalid model: {exc}") from exc
        checks = validate(model)
        for c in checks:
            status = "pass" if c.passed else "FAIL"
            tag = "required" if c.required else "info"
            witness = "n/a" if c.witness is None else f"{c.witness:.6g}"
            bound = "n/a" if c.bound is None else f"{c.bound:.6g}"
            click.echo(f"{c.name:<22} {status:<5} {tag:<9} witness={witness:<12} bound={bound:<12} {c.detail}")
        if blocking_failures(checks):
            ctx.exit(1)
