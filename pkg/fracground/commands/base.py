"""Shared plumbing for the command modules: option set, run preparation and report emission."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

import click

from fracground.config import (
    ConfigError,
    RunConfig,
    Settings,
    dump_run_config,
    load_run_config,
    resolve_run_config,
)
from fracground.schemas import CheckRecord, VerificationReport
from fracground.services.grid import make_grid
from fracground.services.model import ModelProblem, blocking_failures, make_model, validate
from fracground.services.solver import GroundState
from fracground.services.verify import inputs_digest, make_check
from fracground.services.writer import OutputWriter

logger = logging.getLogger(__name__)

EXIT_CHECKS_FAILED = 2


@dataclass
class RunContext:
    command: str
    config: RunConfig
    settings: Settings
    model: ModelProblem
    writer: OutputWriter
    jobs: int


def run_options(fn: Callable) -> Callable:
    """--config, --out, --jobs, --seed."""

    @click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
                  help="TOML run configuration (dotted keys).")
    @click.option("--out", default=None, help="Output directory (falls back to FRACGROUND_OUT).")
    @click.option("--jobs", type=click.IntRange(min=1), default=None, help="Worker processes for sweeps.")
    @click.option("--seed", type=int, default=None, help="Overrides the config seed.")
    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        return fn(*args, **kwargs)

    return wrapper


def build_model(config: RunConfig, positive_mode: Optional[bool] = None) -> ModelProblem:
    grid = make_grid(config.dim, config.L, config.M)
    return make_model(
        grid, config.s, config.effective_potential(), p=config.p, weight=config.weight,
        positive_mode=config.positive_mode if positive_mode is None else positive_mode,
        dealias=config.dealias,
    )


def load_config(ctx: click.Context, config_path: Optional[Path], out: Optional[str], seed: Optional[int]) -> RunConfig:
    settings: Settings = ctx.obj["settings"]
    try:
        return resolve_run_config(load_run_config(config_path), settings, out=out, seed=seed)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc


def describe_failures(failures: Iterable) -> str:
    return ", ".join(f"{c.name} (witness={c.witness if c.witness is not None else 'n/a'}, {c.detail})" for c in failures)


def prepare(
    ctx: click.Context,
    command: str,
    config_path: Optional[Path],
    out: Optional[str],
    jobs: Optional[int],
    seed: Optional[int],
    positive_mode: Optional[bool] = None,
    extra_required: Iterable[str] = (),
    config: Optional[RunConfig] = None,
) -> RunContext:
    """Load, validate and wire one run; configuration problems exit with status 1."""
    settings: Settings = ctx.obj["settings"]
    config = config or load_config(ctx, config_path, out, seed)
    try:
        model = build_model(config, positive_mode=positive_mode)
    except ValueError as exc:
        raise click.ClickException(f"Invalid model: {exc}") from exc

    failures = blocking_failures(validate(model, extra_required=extra_required))
    if failures:
        raise click.ClickException(f"Model assumptions failed: {describe_failures(failures)}")

    try:
        writer = OutputWriter(settings.abs_output_dir(config.output_dir))
        writer.write_resolved_config(dump_run_config(config))
    except OSError as exc:
        raise click.ClickException(f"Cannot write outputs: {exc}") from exc

    run_jobs = jobs or settings.jobs
    logger.info("Running %s: %s (jobs=%d, out=%s)", command, model.grid.describe(), run_jobs, writer.output_dir)
    return RunContext(command=command, config=config, settings=settings, model=model, writer=writer, jobs=run_jobs)


def solve_check(run: RunContext, gs: GroundState, name: str = "converged") -> CheckRecord:
    """Stationarity and Nehari membership in units of the solver tolerances."""
    cfg = run.config.solver
    norm_e_sq = 2.0 * (gs.energy.kinetic + gs.energy.potential)
    terms = [gs.grad_norm / cfg.tol_grad, abs(gs.nehari_res) / (cfg.tol_nehari * max(norm_e_sq, 1e-300))]
    residual = max(terms) if gs.converged else None
    return make_check(
        name, inputs_digest(name, run.model, gs.u),
        {**gs.summary().model_dump(), "energy": gs.energy.model_dump()},
        residual, 1.0, note="residual in units of the solver tolerances",
    )


def finish(ctx: click.Context, run: RunContext, report: VerificationReport, **summary: Any) -> None:
    report.summarize(**summary)
    try:
        path = run.writer.write_report(report)
    except OSError as exc:
        raise click.ClickException(f"Cannot write report: {exc}") from exc
    click.echo(f"{run.command}: {report.summary['passed']}/{report.summary['total']} checks passed -> {path}")
    for check in report.failed:
        click.echo(f"  FAILED {check.name}: residual={check.residual} tolerance={check.tolerance}", err=True)
    if not report.all_passed():
        ctx.exit(EXIT_CHECKS_FAILED)
