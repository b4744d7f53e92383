"""Writer service — report JSON, resolved config and CSV dumps of fields, waves and diagnostics."""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Sequence

import numpy as np

from fracground.schemas import SweepResult, VerificationReport
from fracground.services.evolve import WaveDiagnostics, WaveState
from fracground.services.grid import Field, Grid, make_grid

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"
HEADER_RE = re.compile(r"#\s*grid:\s*dim=(\d+)\s+L=(\S+)\s+M=(\d+)")


def grid_header(grid: Grid) -> str:
    return f"grid: dim={grid.dim} L={grid.extent:.17g} M={grid.points}"


def _coordinate_columns(grid: Grid) -> list[np.ndarray]:
    return [c.ravel() for c in grid.coords]


def read_field_csv(path: Path) -> Field:
    """Load a field dumped by `OutputWriter.write_field`."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    match = HEADER_RE.match(first.strip())
    if not match:
        raise ValueError(f"{path}: missing '# grid: dim=<N> L=<L> M=<M>' header")
    grid = make_grid(int(match.group(1)), float(match.group(2)), int(match.group(3)))
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape != (grid.size, grid.dim + 1):
        raise ValueError(f"{path}: expected {grid.size} rows of {grid.dim + 1} columns, got {data.shape}")
    return Field(grid, data[:, -1].reshape(grid.shape))


class OutputWriter:
    """Owns the output directory: report.json, resolved.config, fields/*.csv, diag/*.csv."""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.fields_dir = self.output_dir / "fields"
        self.diag_dir = self.output_dir / "diag"
        for d in (self.output_dir, self.fields_dir, self.diag_dir):
            d.mkdir(parents=True, exist_ok=True)

    # ------------------------------------------------------------------
    # Fields and waves
    # ------------------------------------------------------------------

    def write_field(self, name: str, u: Field) -> str:
        path = self.fields_dir / f"{name}.csv"
        rows = np.column_stack(_coordinate_columns(u.grid) + [u.values.ravel()])
        np.savetxt(path, rows, fmt=CSV_FORMAT, delimiter=",", header=grid_header(u.grid), comments="# ")
        logger.info("Wrote field: %s", path)
        return str(path)

    def write_wave(self, name: str, state: WaveState) -> str:
        path = self.fields_dir / f"{name}.csv"
        psi = state.psi.ravel()
        rows = np.column_stack(_coordinate_columns(state.grid) + [psi.real, psi.imag])
        header = f"{grid_header(state.grid)} t={state.time:.17g}"
        np.savetxt(path, rows, fmt=CSV_FORMAT, delimiter=",", header=header, comments="# ")
        logger.info("Wrote wave snapshot: %s", path)
        return str(path)

    def write_snapshots(self, prefix: str, snapshots: Sequence[WaveState]) -> list[str]:
        return [self.write_wave(f"{prefix}_{i:05d}", state) for i, state in enumerate(snapshots)]

    # ------------------------------------------------------------------
    # Diagnostics
    # ------------------------------------------------------------------

    def write_diagnostics(self, name: str, diag: WaveDiagnostics) -> str:
        path = self.diag_dir / f"{name}.csv"
        rows = np.column_stack([diag.times, diag.mass, diag.energy])
        np.savetxt(path, rows, fmt=CSV_FORMAT, delimiter=",", header="t,mass,energy", comments="")
        logger.info("Wrote diagnostics: %s", path)
        return str(path)

    def write_sweep(self, name: str, sweep: SweepResult) -> str:
        path = self.diag_dir / f"{name}.csv"
        lines = [f"{sweep.parameter_name},level,converged"]
        for param, level, ok in zip(sweep.parameters, sweep.levels, sweep.converged):
            level_text = "" if level is None else CSV_FORMAT % level
            lines.append(f"{CSV_FORMAT % param},{level_text},{int(ok)}")
        path.write_text("\n".join(lines) + "\n")
        logger.info("Wrote sweep table: %s", path)
        return str(path)

    # ------------------------------------------------------------------
    # Report and config
    # ------------------------------------------------------------------

    def write_report(self, report: VerificationReport, name: str = "report.json") -> str:
        path = self.output_dir / name
        path.write_text(report.model_dump_json(by_alias=True, indent=2) + "\n")
        logger.info("Wrote report: %s (%d checks, %d failed)", path, len(report.checks), len(report.failed))
        return str(path)

    def write_resolved_config(self, text: str, name: str = "resolved.config") -> str:
        path = self.output_dir / name
        path.write_text(text)
        logger.info("Wrote resolved config: %s", path)
        return str(path)


def load_report(path: Path) -> VerificationReport:
    return VerificationReport.model_validate_json(Path(path).read_text())
