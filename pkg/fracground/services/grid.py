"""Grid service — periodic computational box, sampled fields and the spectral transform pair.

Conventions:
    The box is [-L/2, L/2)^N sampled at M points per axis, h = L/M.
    Frequencies are xi_k = 2*pi*k/L for k in {-M/2, ..., M/2-1}, stored in FFT order.
    The forward transform is the Riemann sum u_hat(xi_k) = h^N * sum_x u(x) exp(-i xi_k . x),
    so that Parseval reads  integral(u v) = L^-N * Re sum_k u_hat_k conj(v_hat_k).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy import fft as sfft

logger = logging.getLogger(__name__)

SUPPORTED_DIMS = (1, 2)
MIN_POINTS = 8


@dataclass(frozen=True)
class Grid:
    """Periodic box of dimension `dim`, side `extent`, `points` samples per axis."""

    dim: int
    extent: float
    points: int

    def __post_init__(self) -> None:
        if self.dim not in SUPPORTED_DIMS:
            raise ValueError(f"Unsupported dimension: {self.dim} (expected one of {SUPPORTED_DIMS})")
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise ValueError(f"Box extent must be positive, got {self.extent}")
        if self.points < MIN_POINTS or self.points % 2:
            raise ValueError(f"Points per axis must be even and >= {MIN_POINTS}, got {self.points}")

    @property
    def spacing(self) -> float:
        return self.extent / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points ** self.dim

    # ------------------------------------------------------------------
    # Physical space
    # ------------------------------------------------------------------

    @cached_property
    def axis(self) -> np.ndarray:
        return -0.5 * self.extent + self.spacing * np.arange(self.points)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        if self.dim == 1:
            return (self.axis,)
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def origin_index(self) -> tuple[int, ...]:
        return (self.points // 2,) * self.dim

    # ------------------------------------------------------------------
    # Frequency space
    # ------------------------------------------------------------------

    @cached_property
    def mode_numbers(self) -> np.ndarray:
        """Integer mode numbers k per axis, FFT order (Nyquist is -M/2)."""
        return np.fft.fftfreq(self.points, d=1.0 / self.points)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return (2.0 * np.pi / self.extent) * self.mode_numbers

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        if self.dim == 1:
            return (self.wavenumbers,)
        return tuple(np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(sum(k * k for k in self.xi))

    @cached_property
    def phase(self) -> np.ndarray:
        # exp(i xi_k L/2) = (-1)^k per axis; moves the origin of the DFT to the box centre
        per_axis = np.where(self.mode_numbers.astype(np.int64) % 2 == 0, 1.0, -1.0)
        if self.dim == 1:
            return per_axis
        return np.multiply.outer(per_axis, per_axis)

    def symbol(self, exponent: float) -> np.ndarray:
        """|xi|^exponent on the frequency lattice; zero at xi = 0."""
        if exponent <= 0:
            raise ValueError(f"Symbol exponent must be positive, got {exponent}")
        return self.xi_norm ** exponent

    def forward(self, values: np.ndarray) -> np.ndarray:
        return self.cell_volume * self.phase * sfft.fftn(values)

    def backward(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.ifftn(coeffs * self.phase) / self.cell_volume

    def describe(self) -> dict:
        return {"dim": self.dim, "L": self.extent, "M": self.points}


@dataclass(frozen=True)
class Field:
    """Real samples of a function on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(f"Field shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Field values must be finite")
        object.__setattr__(self, "values", values)

    def _coerce(self, other: Union["Field", float]) -> Union[np.ndarray, float]:
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("Fields live on different grids")
            return other.values
        return other

    def __add__(self, other: Union["Field", float]) -> "Field":
        return Field(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other: Union["Field", float]) -> "Field":
        return Field(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other: float) -> "Field":
        return Field(self.grid, other - self.values)

    def __mul__(self, other: Union["Field", float]) -> "Field":
        return Field(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return Field(self.grid, fn(self.values))

    def norm(self) -> float:
        """L2 norm with the grid quadrature."""
        return float(np.sqrt(integrate(self.map(np.square))))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a field, FFT order, Riemann-sum normalization."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != self.grid.shape:
            raise ValueError(f"Coefficient shape {coeffs.shape} does not match grid shape {self.grid.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    def hermitian_defect(self) -> float:
        """max |c(-k) - conj(c(k))| relative to max |c|; zero for transforms of real fields."""
        flipped = self.coeffs
        for axis in range(self.grid.dim):
            flipped = np.roll(np.flip(flipped, axis=axis), 1, axis=axis)
        scale = max(float(np.max(np.abs(self.coeffs))), np.finfo(float).tiny)
        return float(np.max(np.abs(flipped - np.conj(self.coeffs)))) / scale


# ----------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------

def make_grid(dim: int, extent: float, points: int) -> Grid:
    """Build a periodic grid; rejects odd or too few points, bad extent, unsupported dim."""
    grid = Grid(dim=int(dim), extent=float(extent), points=int(points))
    logger.debug("Grid built: dim=%d L=%g M=%d h=%g", grid.dim, grid.extent, grid.points, grid.spacing)
    return grid


def transform(u: Field) -> SpectralField:
    return SpectralField(u.grid, u.grid.forward(u.values))


def inverse_transform(w: SpectralField) -> Field:
    return Field(w.grid, np.real(w.grid.backward(w.coeffs)))


def integrate(u: Field) -> float:
    """Rectangle rule h^N * sum(values); exact for band-limited periodic integrands."""
    return float(u.grid.cell_volume * np.sum(u.values))


def inner(u: Field, v: Field) -> float:
    return integrate(u * v)


def spectral_inner(u: SpectralField, v: SpectralField) -> float:
    """Parseval form of `inner`: L^-N Re sum u_hat conj(v_hat)."""
    if u.grid != v.grid:
        raise ValueError("Spectral fields live on different grids")
    return float(np.real(np.vdot(v.coeffs, u.coeffs))) / u.grid.extent ** u.grid.dim


def sample(grid: Grid, fn: Callable[..., np.ndarray]) -> Field:
    """Evaluate fn(*coords) on the grid."""
    return Field(grid, np.broadcast_to(fn(*grid.coords), grid.shape))


def zeros(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.shape))


def shift(u: Field, offset: tuple[float, ...]) -> Field:
    """Spectral translation: returns x -> u(x + offset) on the periodic box."""
    if len(offset) != u.grid.dim:
        raise ValueError(f"Offset {offset} does not match dimension {u.grid.dim}")
    phase = np.exp(1j * sum(k * a for k, a in zip(u.grid.xi, offset)))
    return Field(u.grid, np.real(u.grid.backward(u.grid.forward(u.values) * phase)))


def gaussian_bump(
    grid: Grid, center: tuple[float, ...] | None = None, width: float = 1.0, mass: float | None = 1.0,
) -> Field:
    """exp(-|x - center|^2 / width^2), scaled to L2 mass `mass` (None keeps unit height)."""
    center = center if center is not None else (0.0,) * grid.dim
    r2 = sum((c - a) ** 2 for c, a in zip(grid.coords, center))
    bump = Field(grid, np.exp(-r2 / width ** 2))
    if mass is None:
        return bump
    return bump * (np.sqrt(mass) / bump.norm())


def random_band_limited(grid: Grid, rng: np.random.Generator, kmax: int = 8, decay: float = 1.0) -> Field:
    """Random real field with modes |k| <= kmax per axis and amplitudes ~ (1+|k|)^-decay."""
    if kmax >= grid.points // 2:
        raise ValueError(f"kmax={kmax} must be below the Nyquist index {grid.points // 2}")
    k = grid.mode_numbers
    masks = np.meshgrid(*([np.abs(k) <= kmax] * grid.dim), indexing="ij")
    band = np.logical_and.reduce(masks)
    knorm = np.sqrt(sum(m * m for m in np.meshgrid(*([k] * grid.dim), indexing="ij")))
    amplitude = np.where(band, (1.0 + knorm) ** (-decay), 0.0)
    coeffs = amplitude * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    values = np.real(sfft.ifftn(coeffs)) * grid.size
    return Field(grid, values / max(float(np.max(np.abs(values))), np.finfo(float).tiny))
