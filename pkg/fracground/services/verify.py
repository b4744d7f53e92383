"""Verification service — identity and inequality checks on computed or supplied fields.

Every check returns plain numbers or a CheckRecord; reports are assembled by the caller.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import platform
from datetime import datetime, timezone
from typing import Any, Optional, Sequence

import numpy as np
import scipy
from scipy import fft as sfft
from scipy import optimize

import fracground
from fracground.schemas import CheckRecord, EmpiricalConstant, VerificationReport, finite_or_none
from fracground.services.energy import gradient
from fracground.services.fraclap import apply_fraclap, hs_seminorm_sq, ws2_norm_sq
from fracground.services.grid import Field, Grid, integrate, make_grid, random_band_limited, sample
from fracground.services.model import ModelProblem, Potential, eval_F, power_f
from fracground.services.nehari import fiber_profile, fibering_max, project
from fracground.services.solver import GroundState, center, normalize_sign

logger = logging.getLogger(__name__)

WRAP_FRACTION = 0.05
STABILITY_RTOL = 0.10
IMAGES_1D = 64
IMAGES_2D = 16


# ----------------------------------------------------------------------
# Records
# ----------------------------------------------------------------------

def inputs_digest(*parts: Any) -> str:
    """sha256 over fields (grid + raw samples), models and JSON-able values."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, Field):
            h.update(json.dumps(part.grid.describe(), sort_keys=True).encode())
            h.update(np.ascontiguousarray(part.values).tobytes())
        elif isinstance(part, np.ndarray):
            h.update(str(part.shape).encode())
            h.update(np.ascontiguousarray(part, dtype=float).tobytes())
        elif isinstance(part, ModelProblem):
            h.update(json.dumps(part.describe(), sort_keys=True).encode())
        else:
            h.update(json.dumps(part, sort_keys=True, default=str).encode())
    return h.hexdigest()


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return finite_or_none(value)
    return value


def make_check(
    name: str,
    digest: str,
    quantities: dict[str, Any],
    residual: Optional[float],
    tolerance: float,
    applicable: bool = True,
    note: str = "",
) -> CheckRecord:
    record = CheckRecord(
        name=name, inputs_digest=digest, quantities=_clean(quantities),
        residual=finite_or_none(residual), tolerance=tolerance,
        passed=None, applicable=applicable, note=note,
    )
    status = "n/a" if not applicable else ("pass" if record.passed else "FAIL")
    logger.info("Check %-22s %s (residual=%s, tolerance=%g)", name, status, record.residual, tolerance)
    return record


def versions() -> dict[str, str]:
    return {
        "fracground": fracground.__version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def new_report(command: str, model: Optional[ModelProblem] = None) -> VerificationReport:
    return VerificationReport(
        command=command,
        created_at=datetime.now(timezone.utc).isoformat(),
        model=model.describe() if model is not None else {},
        versions=versions(),
    )


# ----------------------------------------------------------------------
# Reference profiles
# ----------------------------------------------------------------------

def benchmark_profile(grid: Grid, omega: float = 1.0) -> Field:
    """omega * u*(omega x) with u*(x) = 2/(1+x^2): the exact ground state for N=1, s=1/2, V=omega, f=u^2."""
    if grid.dim != 1:
        raise ValueError("The closed-form benchmark profile is one-dimensional")
    return sample(grid, lambda x: 2.0 * omega / (1.0 + (omega * x) ** 2))


def profile_error(u: Field, reference: Field) -> float:
    """Sup-norm relative error after centering and sign normalization of u."""
    aligned = center(normalize_sign(u))
    return float(np.max(np.abs(aligned.values - reference.values)) / reference.max_abs())


# ----------------------------------------------------------------------
# Pohozaev
# ----------------------------------------------------------------------

def pohozaev_residual(model: ModelProblem, u: Field) -> tuple[float, tuple[float, float, float]]:
    """R = ((N-2s)/2) K + (N/2) P - N int F(u), with K the H^s seminorm and P = int V u^2.

    Returns R and the three weighted parts.
    """
    if not model.is_autonomous:
        raise ValueError("Pohozaev identity needs a constant potential and a constant weight")
    n, s = model.grid.dim, model.s
    kinetic = hs_seminorm_sq(u, s)
    potential = float(model.grid.cell_volume * np.sum(model.v_values * u.values ** 2))
    primitive = integrate(eval_F(model, u))
    parts = (0.5 * (n - 2.0 * s) * kinetic, 0.5 * n * potential, n * primitive)
    return parts[0] + parts[1] - parts[2], parts


def pohozaev_check(model: ModelProblem, u: Field, rtol: float = 1e-3, solution_tol: float = 1e-3) -> CheckRecord:
    digest = inputs_digest("pohozaev", model, u)
    note = "split form ((N-2s)/2) K + (N/2) P = N int F"
    if not model.is_autonomous:
        return make_check("pohozaev", digest, {}, None, rtol, applicable=False,
                          note="not applicable: potential or weight is x-dependent")
    residual, parts = pohozaev_residual(model, u)
    stationarity = gradient(model, u).norm() / u.norm()
    tolerance = rtol * abs(parts[2])
    quantities = {"kinetic_part": parts[0], "potential_part": parts[1], "nonlinear_part": parts[2],
                  "R": residual, "stationarity": stationarity}
    if stationarity > solution_tol:
        return make_check("pohozaev", digest, quantities, abs(residual), tolerance, applicable=False,
                          note=f"{note}; not applicable: field is not a solution (|g|/|u|={stationarity:.2e})")
    return make_check("pohozaev", digest, quantities, abs(residual), tolerance, note=note)


# ----------------------------------------------------------------------
# Decay
# ----------------------------------------------------------------------

def default_decay_window(grid: Grid) -> tuple[float, float]:
    half = 0.5 * grid.extent
    return 0.25 * half, 0.45 * half


def _window_mask(u: Field, window: Optional[tuple[float, float]]) -> tuple[np.ndarray, tuple[float, float]]:
    grid = u.grid
    lo, hi = window if window is not None else default_decay_window(grid)
    half = 0.5 * grid.extent
    if not 0 < lo < hi:
        raise ValueError(f"Decay window must satisfy 0 < lo < hi, got ({lo}, {hi})")
    if hi > (1.0 - WRAP_FRACTION) * half:
        raise ValueError(f"Decay window ({lo}, {hi}) reaches the periodic wrap region beyond {(1 - WRAP_FRACTION) * half:g}")
    mask = (grid.radius >= lo) & (grid.radius <= hi)
    if not np.any(mask):
        raise ValueError(f"Decay window ({lo}, {hi}) contains no grid points")
    if np.any(u.values[mask] <= 0):
        raise ValueError("Decay fit needs u > 0 on the window")
    return mask, (lo, hi)


def _power_slope(radius: np.ndarray, values: np.ndarray) -> float:
    return float(np.polyfit(np.log(radius), np.log(values), 1)[0])


def _image_sum(points: np.ndarray, extent: float, alpha: float, dim: int) -> np.ndarray:
    """sum over the periodic lattice of |x + nL|^-alpha, with an integral tail estimate."""
    k = IMAGES_1D if dim == 1 else IMAGES_2D
    n = np.arange(-k, k + 1, dtype=float)
    if dim == 1:
        dist = np.abs(points[:, None] + extent * n[None, :])
        tail = 2.0 * extent ** -alpha * (k + 0.5) ** (1.0 - alpha) / (alpha - 1.0)
    else:
        lattice = np.stack(np.meshgrid(n, n, indexing="ij"), axis=-1).reshape(-1, 2)
        dist = np.linalg.norm(points[:, None, :] + extent * lattice[None, :, :], axis=-1)
        tail = 2.0 * math.pi * extent ** -alpha * (k + 0.5) ** (2.0 - alpha) / (alpha - 2.0)
    return np.sum(dist ** -alpha, axis=1) + tail


def _periodic_slope(u: Field, mask: np.ndarray) -> float:
    grid = u.grid
    if grid.dim == 1:
        points = grid.axis[mask]
    else:
        points = np.stack([c[mask] for c in grid.coords], axis=-1)
    log_u = np.log(u.values[mask])

    def misfit(alpha: float) -> float:
        log_s = np.log(_image_sum(points, grid.extent, alpha, grid.dim))
        offset = np.mean(log_u - log_s)
        return float(np.sum((log_u - offset - log_s) ** 2))

    result = optimize.minimize_scalar(misfit, bounds=(grid.dim + 0.05, 12.0), method="bounded",
                                      options={"xatol": 1e-8})
    return -float(result.x)


def decay_slope(u: Field, window: Optional[tuple[float, float]] = None, periodic: bool = False) -> float:
    """Log-log tail slope of u over the radial window.

    periodic=False fits a bare power law (1D: mean of both tails, 2D: radially binned average).
    periodic=True fits A * sum_n |x + nL|^-alpha over the lattice images and returns -alpha.
    """
    mask, (lo, hi) = _window_mask(u, window)
    grid = u.grid
    if periodic:
        return _periodic_slope(u, mask)
    if grid.dim == 1:
        x = grid.axis
        slopes = []
        for side in (1.0, -1.0):
            tail = mask & (side * x > 0)
            slopes.append(_power_slope(np.abs(x[tail]), u.values[tail]))
        return float(np.mean(slopes))
    radius = grid.radius[mask]
    values = u.values[mask]
    edges = np.linspace(lo, hi, max(8, int((hi - lo) / grid.spacing)) + 1)
    bins = np.clip(np.digitize(radius, edges) - 1, 0, len(edges) - 2)
    counts = np.bincount(bins, minlength=len(edges) - 1)
    sums = np.bincount(bins, weights=values, minlength=len(edges) - 1)
    r_sums = np.bincount(bins, weights=radius, minlength=len(edges) - 1)
    filled = counts > 0
    return _power_slope(r_sums[filled] / counts[filled], sums[filled] / counts[filled])


def decay_check(
    u: Field, expected: float, tolerance: float = 0.1,
    window: Optional[tuple[float, float]] = None, periodic: bool = True,
) -> CheckRecord:
    """Tail slope against `expected`; both fits are reported, the residual uses the one `periodic` selects.

    On a periodic box the computed field carries the tails of its lattice images, which bends the
    bare log-log slope toward zero near the window edge. The image-sum fit models those images;
    the bare fit matches the free-space profile.
    """
    window = window if window is not None else default_decay_window(u.grid)
    slope_periodic = decay_slope(u, window, periodic=True)
    slope_bare = decay_slope(u, window, periodic=False)
    slope = slope_periodic if periodic else slope_bare
    fit = "periodic image-sum" if periodic else "bare log-log"
    return make_check(
        "decay", inputs_digest("decay", u, list(window), periodic),
        {"slope": slope, "slope_periodic_fit": slope_periodic, "slope_bare_fit": slope_bare,
         "expected": expected, "window": list(window), "periodic_fit": periodic},
        abs(slope - expected), tolerance,
        note=f"residual from the {fit} fit; the bare fit on a periodic box includes the lattice images' tails",
    )


# ----------------------------------------------------------------------
# Empirical constants: Gagliardo-Nirenberg, Sobolev, commutator
# ----------------------------------------------------------------------

def random_fields(grid: Grid, count: int, seed: int, kmax: int = 16) -> list[Field]:
    """Seeded band-limited fields; the first half is a prefix of the same stream."""
    rng = np.random.default_rng(seed)
    kmax = min(kmax, grid.points // 2 - 1)
    return [random_band_limited(grid, rng, kmax=kmax) for _ in range(count)]


def _empirical(ratios: Sequence[float]) -> EmpiricalConstant:
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise ValueError("Empirical constant needs at least one sample")
    full = float(np.max(ratios))
    half = float(np.max(ratios[: max(1, ratios.size // 2)]))
    stable = math.isfinite(full) and abs(full - half) <= STABILITY_RTOL * abs(full)
    return EmpiricalConstant(max_ratio=full, first_half_max=half, count=int(ratios.size), stable=stable)


def gn_ratio(u: Field, s: float, q: float) -> float:
    """||u||_{q+1}^{q+1} / (||u||_W^theta ||u||_2^(q+1-theta)), theta = (q-1)N/(2s)."""
    theta = (q - 1.0) * u.grid.dim / (2.0 * s)
    lhs = integrate(u.map(lambda v: np.abs(v) ** (q + 1.0)))
    return lhs / (ws2_norm_sq(u, s) ** (0.5 * theta) * u.norm() ** (q + 1.0 - theta))


def gn_check(fields: Sequence[Field], s: float, q: float) -> EmpiricalConstant:
    if q <= 1:
        raise ValueError(f"Gagliardo-Nirenberg exponent q must exceed 1, got {q}")
    dim = fields[0].grid.dim
    theta = (q - 1.0) * dim / (2.0 * s)
    if theta > q + 1:
        raise ValueError(f"(q-1)N/(2s) = {theta:g} exceeds q+1 = {q + 1:g}")
    return _empirical([gn_ratio(u, s, q) for u in fields])


def sobolev_check(fields: Sequence[Field], s: float) -> EmpiricalConstant:
    """||u||_{2*}^2 / ||(-Delta)^(s/2) u||_2^2 with 2* = 2N/(N-2s); needs 2s < N."""
    dim = fields[0].grid.dim
    if not 2.0 * s < dim:
        raise ValueError(f"Sobolev embedding check needs 2s < N, got s={s}, N={dim}")
    crit = 2.0 * dim / (dim - 2.0 * s)
    ratios = []
    for u in fields:
        seminorm = hs_seminorm_sq(u, s)
        if seminorm > 0:
            ratios.append(integrate(u.map(lambda v: np.abs(v) ** crit)) ** (2.0 / crit) / seminorm)
    return _empirical(ratios)


def commutator(phi: Field, u: Field, s: float) -> Field:
    """phi * Lambda u - Lambda(phi u), Lambda = (-Delta)^(s/2)."""
    return phi * apply_fraclap(u, s, 0.5) - apply_fraclap(phi * u, s, 0.5)


def commutator_check(phi: Field, fields: Sequence[Field], s: float) -> EmpiricalConstant:
    return _empirical([commutator(phi, u, s).norm() / math.sqrt(ws2_norm_sq(u, s)) for u in fields])


def empirical_check(name: str, constant: EmpiricalConstant, digest: str) -> CheckRecord:
    residual = abs(constant.max_ratio - constant.first_half_max) / abs(constant.max_ratio) \
        if constant.max_ratio and math.isfinite(constant.max_ratio) else None
    return make_check(name, digest, constant.model_dump(), residual, STABILITY_RTOL,
                      note="stability of the sample maximum under halving the sample set")


# ----------------------------------------------------------------------
# Cutoffs
# ----------------------------------------------------------------------

def cutoff_profile(t: np.ndarray) -> np.ndarray:
    """1 for t <= 1, 0 for t >= 2, quintic smoothstep in between."""
    tau = np.clip(np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau ** 2)


def cutoff(grid: Grid, radius: float) -> Field:
    if radius <= 0:
        raise ValueError(f"Cutoff radius must be positive, got {radius}")
    return Field(grid, cutoff_profile(grid.radius / radius))


def cutoff_convergence(u: Field, radii: Sequence[float], s: float) -> list[float]:
    """d(R) = ||(-Delta)^(s/2)(chi_R u - u)||_2 for each R."""
    return [math.sqrt(hs_seminorm_sq(cutoff(u.grid, r) * u - u, s)) for r in radii]


def cutoff_vanishing(u: Field, radii: Sequence[float], s: float) -> list[float]:
    """||(-Delta)^(s/2)(chi_R u)||_2 for each R; tends to 0 as R -> 0 when s < N/2."""
    if not s < 0.5 * u.grid.dim:
        raise ValueError(f"Small-scale cutoff limit needs s < N/2, got s={s}, N={u.grid.dim}")
    return [math.sqrt(hs_seminorm_sq(cutoff(u.grid, r) * u, s)) for r in radii]


def cutoff_check(u: Field, radii: Sequence[float], s: float) -> CheckRecord:
    radii = sorted(float(r) for r in radii)
    full_box = 0.5 * u.grid.extent * math.sqrt(u.grid.dim)
    distances = cutoff_convergence(u, radii + [full_box], s)
    tail, at_full = distances[:-1], distances[-1]
    violations = sum(1 for a, b in zip(tail, tail[1:]) if not (b < a or a == b == 0.0))
    violations += int(at_full != 0.0)
    return make_check(
        "cutoff", inputs_digest("cutoff", u, radii, s),
        {"radii": radii, "distances": tail, "full_box_radius": full_box, "distance_full_box": at_full},
        float(violations), 0.0, note="d(R) strictly decreasing and exactly 0 once chi_R = 1 on the box",
    )


# ----------------------------------------------------------------------
# Levels
# ----------------------------------------------------------------------

def level_consistency(
    model: ModelProblem, gs: GroundState, seed: int = 0,
    t_tol: float = 1e-6, level_rtol: float = 1e-8, noise: float = 0.01,
) -> CheckRecord:
    """Ground state is its own fiber maximum and no nearby Nehari point sits below it.

    The residual is the worst sub-check measured in units of its own tolerance.
    """
    digest = inputs_digest("level", model, gs.u, seed)
    if not gs.converged:
        return make_check("level_consistency", digest, {"level": gs.level}, None, 1.0, applicable=False,
                          note="not applicable: ground state did not converge")
    u, level = gs.u, gs.level
    scale = level_rtol * max(abs(level), np.finfo(float).tiny)
    proj = project(model, u)
    thetas = np.linspace(0.5, 1.5, 101)
    scan_max = float(np.max(fiber_profile(model, u, thetas)))

    rng = np.random.default_rng(seed)
    kmax = min(32, model.grid.points // 2 - 1)
    perturbation = random_band_limited(model.grid, rng, kmax=kmax) * (noise * u.max_abs())
    perturbed_max = fibering_max(model, u + perturbation)

    terms = {
        "t_star": abs(proj.t_star - 1.0) / t_tol,
        "fiber_max": abs(proj.fiber_value - level) / scale,
        "theta_scan": max(0.0, scan_max - level) / scale,
        "perturbed": max(0.0, level - perturbed_max) / scale,
    }
    quantities = {"level": level, "t_star": proj.t_star, "fiber_max": proj.fiber_value,
                  "theta_scan_max": scan_max, "perturbed_fiber_max": perturbed_max, "normalized_terms": terms}
    return make_check("level_consistency", digest, quantities, max(terms.values()), 1.0,
                      note="residual is the largest sub-check in units of its tolerance")


# ----------------------------------------------------------------------
# Concentration and rescaling
# ----------------------------------------------------------------------

def concentration(u: Field, radius: float) -> float:
    """sup_y int_{B(y,R)} |u|^2 by periodic FFT convolution."""
    grid = u.grid
    ball = np.fft.ifftshift((grid.radius <= radius).astype(float))
    density = u.values ** 2
    local = np.real(sfft.ifftn(sfft.fftn(density) * sfft.fftn(ball))) * grid.cell_volume
    return float(np.max(local))


def concentration_check(u: Field, radius: float, floor: float) -> CheckRecord:
    """Non-vanishing witness: the mass in the best ball of radius R stays above `floor`."""
    mass = concentration(u, radius)
    return make_check("concentration", inputs_digest("concentration", u, radius),
                      {"radius": radius, "sup_ball_mass": mass, "total_mass": u.norm() ** 2},
                      max(0.0, floor - mass), 0.0)


def singular_perturbation_residual(model: ModelProblem, gs: GroundState) -> float:
    """Relative residual of eps^2s (-Delta)^s v + V(y) v - f(v) for v(y) = u(y/eps) on the box of side eps L."""
    spec = model.potential.spec
    if model.potential.epsilon == 1.0 and spec.inner is None:
        eps, inner = 1.0, model.potential
        outer_offset = 0.0
    else:
        eps, inner, outer_offset = spec.epsilon, Potential(spec.inner), spec.offset
    if not model.nonlinearity.is_autonomous:
        raise ValueError("Rescaling check needs an x-independent nonlinearity")
    grid = model.grid
    scaled = make_grid(grid.dim, eps * grid.extent, grid.points)
    v = Field(scaled, gs.u.values)
    potential = inner(*scaled.coords) + outer_offset
    values = np.maximum(v.values, 0.0) if model.positive_mode else v.values
    a = float(np.atleast_1d(model.a_values).flat[0])
    residual = eps ** (2.0 * model.s) * apply_fraclap(v, model.s, 1.0).values + potential * v.values \
        - power_f(a, values, model.p)
    return Field(scaled, residual).norm() / v.norm()
