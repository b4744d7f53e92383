"""Evolve service — Strang split-step integrator for i psi_t = (-Delta)^s psi + V psi - a|psi|^(p-1) psi."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from fracground.services.grid import Field, Grid
from fracground.services.model import ModelProblem

logger = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e3


class BlowUpError(RuntimeError):
    """max |psi| exceeded the guard relative to its initial value."""


@dataclass(frozen=True)
class WaveState:
    grid: Grid
    psi: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=np.complex128)
        if psi.shape != self.grid.shape:
            raise ValueError(f"Wave shape {psi.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(psi)):
            raise ValueError("Wave values must be finite")
        object.__setattr__(self, "psi", psi)

    @classmethod
    def from_field(cls, u: Field, time: float = 0.0) -> WaveState:
        return cls(u.grid, u.values.astype(np.complex128), time)

    def mass(self) -> float:
        return float(self.grid.cell_volume * np.sum(np.abs(self.psi) ** 2))

    def modulus(self) -> Field:
        return Field(self.grid, np.abs(self.psi))


@dataclass
class WaveDiagnostics:
    times: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    max_modulus_drift: float = 0.0
    snapshots: list[WaveState] = field(default_factory=list)

    def max_mass_drift_per_step(self, steps_between: int = 1) -> float:
        """Largest relative mass change between consecutive records, per step."""
        mass = np.asarray(self.mass)
        if mass.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(mass))) / mass[0] / max(steps_between, 1))

    def energy_drift(self) -> float:
        """max_t |E(t) - E(0)| / |E(0)|."""
        energy = np.asarray(self.energy)
        return float(np.max(np.abs(energy - energy[0])) / max(abs(energy[0]), np.finfo(float).tiny))


def energy_of_wave(model: ModelProblem, state: WaveState) -> float:
    """1/2 int |xi|^2s |psi_hat|^2 + 1/2 int V |psi|^2 - int a |psi|^(p+1)/(p+1)."""
    grid = state.grid
    coeffs = grid.forward(state.psi)
    kinetic = 0.5 * float(np.sum(grid.symbol(2.0 * model.s) * np.abs(coeffs) ** 2)) / grid.extent ** grid.dim
    modulus = np.abs(state.psi)
    potential = 0.5 * grid.cell_volume * float(np.sum(model.v_values * modulus ** 2))
    p = model.p
    nonlinear = grid.cell_volume * float(np.sum(model.a_values * modulus ** (p + 1.0) / (p + 1.0)))
    return kinetic + potential - nonlinear


def split_step(
    model: ModelProblem,
    psi0: WaveState,
    dt: float,
    steps: int,
    record_every: int = 1,
    snapshot_every: int = 0,
    backward: bool = False,
) -> tuple[WaveState, WaveDiagnostics]:
    """Strang splitting: half pointwise phase, full spectral step, half pointwise phase.

    Both substeps are exact; `backward` integrates with -dt.
    """
    if dt <= 0:
        raise ValueError(f"Time step must be positive, got {dt}")
    if steps < 0:
        raise ValueError(f"Step count must be non-negative, got {steps}")
    if psi0.grid != model.grid:
        raise ValueError("Wave and model live on different grids")
    tau = -dt if backward else dt
    grid = model.grid
    v = model.v_values
    a = model.a_values
    p = model.p
    linear = np.exp(-1j * grid.symbol(2.0 * model.s) * tau)

    def half_phase(psi: np.ndarray) -> np.ndarray:
        return psi * np.exp(-1j * (v - a * np.abs(psi) ** (p - 1.0)) * (0.5 * tau))

    psi = psi0.psi.copy()
    initial_modulus = np.abs(psi)
    initial_max = float(np.max(initial_modulus))
    if initial_max == 0:
        raise ValueError("Initial wave is identically zero")
    guard = BLOWUP_FACTOR * initial_max

    diag = WaveDiagnostics()
    time = psi0.time

    def record(state_psi: np.ndarray, t: float) -> None:
        state = WaveState(grid, state_psi, t)
        diag.times.append(t)
        diag.mass.append(state.mass())
        diag.energy.append(energy_of_wave(model, state))
        drift = float(np.max(np.abs(np.abs(state_psi) - initial_modulus))) / initial_max
        diag.max_modulus_drift = max(diag.max_modulus_drift, drift)

    record(psi, time)
    if snapshot_every:
        diag.snapshots.append(WaveState(grid, psi.copy(), time))

    for n in range(1, steps + 1):
        psi = half_phase(psi)
        psi = sfft.ifftn(linear * sfft.fftn(psi))
        psi = half_phase(psi)
        time = psi0.time + n * tau
        peak = float(np.max(np.abs(psi)))
        if not np.isfinite(peak) or peak > guard:
            raise BlowUpError(f"max|psi| = {peak:.3e} exceeded {BLOWUP_FACTOR:g}x the initial {initial_max:.3e} at t={time:g}")
        if n % record_every == 0 or n == steps:
            record(psi, time)
        if snapshot_every and n % snapshot_every == 0:
            diag.snapshots.append(WaveState(grid, psi.copy(), time))
        if steps >= 10 and n % max(1, steps // 10) == 0:
            logger.debug("Split step %d/%d: t=%g mass=%.15g", n, steps, time, diag.mass[-1])

    final = WaveState(grid, psi, time)
    logger.info("Evolved %d steps to t=%g: modulus drift %.3e, energy drift %.3e",
                steps, time, diag.max_modulus_drift, diag.energy_drift())
    return final, diag


def single_mode(grid: Grid, mode: tuple[int, ...], amplitude: float = 1.0) -> WaveState:
    """amplitude * exp(i xi_k . x) for integer mode numbers k."""
    phase = sum(2.0 * np.pi * k / grid.extent * c for k, c in zip(mode, grid.coords))
    return WaveState(grid, amplitude * np.exp(1j * phase))


def gaussian_wave(grid: Grid, amplitude: float = 1.0, width: float = 1.0) -> WaveState:
    r2 = grid.radius ** 2
    return WaveState(grid, amplitude * np.exp(-r2 / width ** 2))


def modulus_error(state: WaveState, reference: Field) -> float:
    return float(np.max(np.abs(np.abs(state.psi) - reference.values)) / reference.max_abs())
