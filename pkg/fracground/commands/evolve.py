"""Evolve command — split-step propagation of a ground state or a Gaussian, with conservation checks."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import click

from fracground.commands.base import finish, prepare, run_options, solve_check
from fracground.config import InitialWave
from fracground.services.evolve import BlowUpError, WaveState, gaussian_wave, split_step
from fracground.services.nehari import ProjectionError
from fracground.services.solver import solve_ground_state, solve_positive
from fracground.services.verify import inputs_digest, make_check, new_report

logger = logging.getLogger(__name__)

MASS_DRIFT_TOL = 1e-12
STANDING_WAVE_TOL = 1e-5


def register_evolve_commands(cli: click.Group) -> None:
    """Register evolve on the CLI group."""

    @cli.command("evolve")
    @run_options
    @click.pass_context
    def evolve_cmd(ctx: click.Context, config_path: Optional[Path], out: Optional[str],
                   jobs: Optional[int], seed: Optional[int]) -> None:
        """Integrate i psi_t = (-Delta)^s psi + V psi - a |psi|^(p-1) psi from evolve.initial.

        A ground-state start must stay a standing wave: its modulus may not drift.
        """
        run = prepare(ctx, "evolve", config_path, out, jobs, seed)
        model, ecfg = run.model, run.config.evolve
        report = new_report("evolve", model)

        gs = None
        if ecfg.initial == InitialWave.GROUND_STATE:
            try:
                gs = solve_positive(model, run.config.solver) if model.positive_mode \
                    else solve_ground_state(model, run.config.solver)
            except ProjectionError as exc:
                raise click.ClickException(f"Initial guess rejected: {exc}") from exc
            report.add(solve_check(run, gs))
            run.writer.write_field("ground_state", gs.u)
            psi0 = WaveState.from_field(gs.u)
        else:
            psi0 = gaussian_wave(model.grid, ecfg.amplitude, ecfg.width)

        digest = inputs_digest("evolve", model, psi0.psi.real, psi0.psi.imag, ecfg.dt, ecfg.steps)
        try:
            final, diag = split_step(model, psi0, ecfg.dt, ecfg.steps, record_every=ecfg.record_every,
                                     snapshot_every=ecfg.snapshot_every)
        except BlowUpError as exc:
            logger.warning("Evolution aborted: %s", exc)
            report.add(make_check("blow_up", digest, {"error": str(exc)}, 1.0, 0.0,
                                  note="max|psi| stayed below the blow-up guard"))
            finish(ctx, run, report, dt=ecfg.dt, steps=ecfg.steps, blow_up=True)
            return

        run.writer.write_diagnostics("evolve", diag)
        run.writer.write_wave("final_wave", final)
        if diag.snapshots:
            run.writer.write_snapshots("snapshot", diag.snapshots)

        report.add(make_check("blow_up", digest, {"final_time": final.time}, 0.0, 0.0,
                              note="max|psi| stayed below the blow-up guard"))
        mass_drift = diag.max_mass_drift_per_step(ecfg.record_every)
        report.add(make_check(
            "mass_drift", digest, {"initial_mass": diag.mass[0], "final_mass": diag.mass[-1],
                                   "drift_per_step": mass_drift},
            mass_drift, MASS_DRIFT_TOL, note="relative change of int |psi|^2 per step",
        ))
        if gs is not None:
            report.add(make_check(
                "standing_wave", digest,
                {"max_modulus_drift": diag.max_modulus_drift, "energy_drift": diag.energy_drift(),
                 "final_time": final.time},
                diag.max_modulus_drift if gs.converged else None, STANDING_WAVE_TOL,
                applicable=gs.converged, note="max_t || |psi(t)| - u ||_inf / ||u||_inf",
            ))
        finish(ctx, run, report, dt=ecfg.dt, steps=ecfg.steps, final_time=final.time,
               energy_drift=diag.energy_drift(), blow_up=False)
