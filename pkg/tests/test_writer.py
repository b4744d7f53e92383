from __future__ import annotations

import json

import numpy as np
import pytest

from fracground.schemas import SweepPoint, SweepResult
from fracground.services.evolve import WaveDiagnostics, gaussian_wave
from fracground.services.grid import gaussian_bump, make_grid
from fracground.services.verify import make_check, new_report
from fracground.services.writer import OutputWriter, load_report, read_field_csv


@pytest.fixture
def writer(tmp_path):
    return OutputWriter(tmp_path / "run")


def test_output_layout(writer):
    assert writer.fields_dir.is_dir()
    assert writer.diag_dir.is_dir()


@pytest.mark.parametrize("dim,points", [(1, 64), (2, 16)])
def test_field_csv_reads_back_bit_for_bit(writer, dim, points):
    grid = make_grid(dim, 12.5, points)
    u = gaussian_bump(grid) * 0.3
    path = writer.write_field("bump", u)
    with open(path) as fh:
        assert fh.readline().strip() == f"# grid: dim={dim} L=12.5 M={points}"
    back = read_field_csv(path)
    assert back.grid == grid
    assert np.array_equal(back.values, u.values)


def test_field_csv_needs_its_header(tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text("0.0,1.0\n0.5,2.0\n")
    with pytest.raises(ValueError, match="header"):
        read_field_csv(path)
    path.write_text("# grid: dim=1 L=10 M=8\n0.0,1.0\n")
    with pytest.raises(ValueError, match="rows"):
        read_field_csv(path)


def test_wave_and_diagnostics_tables(writer):
    state = gaussian_wave(make_grid(1, 10.0, 32))
    path = writer.write_wave("wave", state)
    with open(path) as fh:
        header = fh.readline()
    assert header.startswith("# grid: dim=1") and "t=0" in header
    assert np.loadtxt(path, delimiter=",", comments="#").shape == (32, 3)

    diag = WaveDiagnostics(times=[0.0, 0.1], mass=[1.0, 1.0], energy=[-0.5, -0.5])
    path = writer.write_diagnostics("evolve", diag)
    lines = open(path).read().splitlines()
    assert lines[0] == "t,mass,energy"
    assert len(lines) == 3


def test_sweep_table_leaves_failed_levels_blank(writer):
    sweep = SweepResult(
        parameter_name="shift", parameters=[0.0, 1.0], levels=[1.5, None], converged=[True, False],
        points=[SweepPoint(index=0, parameter=0.0, level=1.5, converged=True),
                SweepPoint(index=1, parameter=1.0, error="V1 fails")],
    )
    lines = open(writer.write_sweep("sweep", sweep)).read().splitlines()
    assert lines == ["shift,level,converged", "0,1.5,1", "1,,0"]


def test_report_uses_pass_and_reloads(writer):
    report = new_report("solve")
    report.add(make_check("converged", "abc", {"grad_norm": 1e-9}, 1e-9, 1e-8))
    report.summarize(level=0.5)
    path = writer.write_report(report)
    payload = json.loads(open(path).read())
    assert payload["checks"][0]["pass"] is True
    assert "passed" not in payload["checks"][0]
    assert load_report(path) == report


def test_resolved_config_is_written_verbatim(writer):
    path = writer.write_resolved_config('dim = 1\nL = 40.0\n')
    assert open(path).read() == 'dim = 1\nL = 40.0\n'
