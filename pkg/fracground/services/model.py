"""Model service — potentials, the weighted power nonlinearity and assumption checks."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Union

import numpy as np

from fracground.schemas import AssumptionCheck, PotentialKind, PotentialSpec, constant_potential
from fracground.services.fraclap import check_order
from fracground.services.grid import Field, Grid

logger = logging.getLogger(__name__)

SHELL_FRACTION = 0.1
RELATIVE_IDENTITY_TOL = 1e-12

# Names of the assumption records, in report order.
V1 = "V1"
V2 = "V2"
F1 = "f1"
F2 = "f2"
F3_SUBCRITICAL = "f3-subcritical"
F3_GROWTH = "f3-growth"
F4 = "f4"
F5 = "f5"
V3_V4 = "V3/V4"
V5 = "V5"
OUTSIDE_BALL = "V>=Vinf-outside-ball"

ALWAYS_REQUIRED = (V1, F3_SUBCRITICAL)


# ----------------------------------------------------------------------
# Potentials
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """Evaluable potential built from a PotentialSpec."""

    spec: PotentialSpec

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        return self._evaluate(self.spec, coords)

    @staticmethod
    def _evaluate(spec: PotentialSpec, coords: tuple[np.ndarray, ...]) -> np.ndarray:
        r2 = sum(np.asarray(c, dtype=float) ** 2 for c in coords)
        p = spec.params
        if spec.kind is PotentialKind.CONSTANT:
            out = np.full(np.shape(r2), p["value"], dtype=float)
        elif spec.kind is PotentialKind.WELL:
            out = p["v_inf"] - p["depth"] / (1.0 + r2 / p["width"] ** 2)
        elif spec.kind is PotentialKind.BUMP:
            out = p["base"] + p["height"] * np.exp(-r2 / p["width"] ** 2)
        elif spec.kind is PotentialKind.COERCIVE:
            out = p["base"] + p["coef"] * r2 ** (0.5 * p["power"])
        else:
            scaled = tuple(spec.epsilon * np.asarray(c, dtype=float) for c in coords)
            out = Potential._evaluate(spec.inner, scaled)
        return out + spec.offset

    @property
    def kind(self) -> PotentialKind:
        return self.spec.kind

    @property
    def v_inf(self) -> float:
        """Declared liminf at infinity (+inf for coercive potentials)."""
        return self._v_inf(self.spec)

    @staticmethod
    def _v_inf(spec: PotentialSpec) -> float:
        p = spec.params
        if spec.kind is PotentialKind.CONSTANT:
            base = p["value"]
        elif spec.kind is PotentialKind.WELL:
            base = p["v_inf"]
        elif spec.kind is PotentialKind.BUMP:
            base = p["base"]
        elif spec.kind is PotentialKind.COERCIVE:
            base = math.inf if p["coef"] > 0 else p["base"]
        else:
            base = Potential._v_inf(spec.inner)
        return base + spec.offset

    @property
    def is_constant(self) -> bool:
        spec = self.spec
        while spec.kind is PotentialKind.RESCALED:
            spec = spec.inner
        if spec.kind is PotentialKind.CONSTANT:
            return True
        if spec.kind is PotentialKind.COERCIVE:
            return spec.params["coef"] == 0
        return spec.params.get("depth", spec.params.get("height", 1.0)) == 0

    @property
    def epsilon(self) -> float:
        return self.spec.epsilon if self.spec.kind is PotentialKind.RESCALED else 1.0

    def at_origin(self, dim: int) -> float:
        zero = (np.zeros(1),) * dim
        return float(self(*zero)[0])

    def sample(self, grid: Grid) -> Field:
        return Field(grid, np.broadcast_to(self(*grid.coords), grid.shape))

    def shifted(self, delta: float) -> Potential:
        return Potential(self.spec.shifted(delta))

    def rescaled(self, epsilon: float) -> Potential:
        return Potential(self.spec.rescaled(epsilon))


def build_potential(spec: Union[PotentialSpec, dict, float]) -> Potential:
    if isinstance(spec, (int, float)):
        spec = constant_potential(spec)
    elif isinstance(spec, dict):
        spec = PotentialSpec.model_validate(spec)
    return Potential(spec)


# ----------------------------------------------------------------------
# Nonlinearity f(x, u) = a(x) |u|^(p-1) u
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Nonlinearity:
    exponent: float
    weight: Union[float, Potential] = 1.0

    def __post_init__(self) -> None:
        if not self.exponent > 1:
            raise ValueError(f"Nonlinearity exponent p must exceed 1, got {self.exponent}")
        if isinstance(self.weight, (int, float)) and self.weight < 0:
            raise ValueError(f"Nonlinearity weight must be non-negative, got {self.weight}")

    @property
    def mu(self) -> float:
        return self.exponent + 1.0

    @property
    def is_autonomous(self) -> bool:
        return not isinstance(self.weight, Potential) or self.weight.is_constant

    def weight_values(self, grid: Grid) -> Union[float, np.ndarray]:
        if isinstance(self.weight, Potential):
            return self.weight(*grid.coords)
        return float(self.weight)

    def describe(self) -> dict:
        weight = self.weight.spec.model_dump(mode="json") if isinstance(self.weight, Potential) else self.weight
        return {"p": self.exponent, "weight": weight}


def power_f(a, u: np.ndarray, p: float) -> np.ndarray:
    return a * np.abs(u) ** (p - 1.0) * u


def power_F(a, u: np.ndarray, p: float) -> np.ndarray:
    return a * np.abs(u) ** (p + 1.0) / (p + 1.0)


def power_fprime(a, u: np.ndarray, p: float) -> np.ndarray:
    return p * a * np.abs(u) ** (p - 1.0)


def critical_exponent(dim: int, s: float) -> float:
    """(N+2s)/(N-2s), or +inf when N - 2s <= 0."""
    denom = dim - 2.0 * s
    return math.inf if denom <= 0 else (dim + 2.0 * s) / denom


# ----------------------------------------------------------------------
# Model problem
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ModelProblem:
    """(-Delta)^s u + V(x) u = f(x, u) on a periodic grid."""

    grid: Grid
    s: float
    potential: Potential
    nonlinearity: Nonlinearity
    positive_mode: bool = False
    dealias: bool = False

    def __post_init__(self) -> None:
        check_order(self.s)

    @cached_property
    def v_values(self) -> np.ndarray:
        return np.broadcast_to(self.potential(*self.grid.coords), self.grid.shape).astype(float)

    @cached_property
    def a_values(self) -> Union[float, np.ndarray]:
        return self.nonlinearity.weight_values(self.grid)

    @cached_property
    def v0(self) -> float:
        return float(np.min(self.v_values))

    @property
    def p(self) -> float:
        return self.nonlinearity.exponent

    @property
    def is_autonomous(self) -> bool:
        return self.potential.is_constant and self.nonlinearity.is_autonomous

    def with_potential(self, potential: Potential) -> ModelProblem:
        return dataclasses.replace(self, potential=potential)

    def with_positive_mode(self, enabled: bool = True) -> ModelProblem:
        return dataclasses.replace(self, positive_mode=enabled)

    def describe(self) -> dict:
        return {
            **self.grid.describe(),
            "s": self.s,
            "potential": self.potential.spec.model_dump(mode="json"),
            **self.nonlinearity.describe(),
            "positive_mode": self.positive_mode,
            "dealias": self.dealias,
        }


def make_model(
    grid: Grid,
    s: float,
    potential: Union[Potential, PotentialSpec, dict, float] = 1.0,
    p: float = 2.0,
    weight: Union[float, Potential, PotentialSpec, dict] = 1.0,
    positive_mode: bool = False,
    dealias: bool = False,
) -> ModelProblem:
    if not isinstance(potential, Potential):
        potential = build_potential(potential)
    if isinstance(weight, (PotentialSpec, dict)):
        weight = build_potential(weight)
    model = ModelProblem(
        grid=grid, s=float(s), potential=potential,
        nonlinearity=Nonlinearity(exponent=float(p), weight=weight),
        positive_mode=positive_mode, dealias=dealias,
    )
    logger.debug("Model built: %s", model.describe())
    return model


# ----------------------------------------------------------------------
# Pointwise evaluation
# ----------------------------------------------------------------------

def _positive_part(model: ModelProblem, u: Field) -> np.ndarray:
    return np.maximum(u.values, 0.0) if model.positive_mode else u.values


def eval_f(model: ModelProblem, u: Field) -> Field:
    return Field(u.grid, power_f(model.a_values, _positive_part(model, u), model.p))


def eval_F(model: ModelProblem, u: Field) -> Field:
    return Field(u.grid, power_F(model.a_values, _positive_part(model, u), model.p))


def eval_fprime(model: ModelProblem, u: Field) -> Field:
    values = power_fprime(model.a_values, u.values, model.p)
    if model.positive_mode:
        values = np.where(u.values >= 0, values, 0.0)
    return Field(u.grid, np.broadcast_to(values, u.grid.shape))


# ----------------------------------------------------------------------
# Assumptions
# ----------------------------------------------------------------------

def _outer_shell(grid: Grid) -> np.ndarray:
    sup_norm = np.max(np.abs(np.stack(grid.coords)), axis=0)
    return sup_norm >= (1.0 - SHELL_FRACTION) * 0.5 * grid.extent


def _check_v2(model: ModelProblem) -> AssumptionCheck:
    v = model.v_values
    v_inf = model.potential.v_inf
    shell_min = float(np.min(v[_outer_shell(model.grid)]))
    if math.isinf(v_inf):
        interior = np.max(np.abs(np.stack(model.grid.coords)), axis=0) <= 0.25 * model.grid.extent
        interior_max = float(np.max(v[interior]))
        return AssumptionCheck(
            name=V2, passed=shell_min > interior_max, witness=shell_min, bound=interior_max,
            detail="Vinf=+inf: shell minimum must exceed the interior maximum",
        )
    tol = model.potential.spec.shell_tolerance * abs(v_inf)
    return AssumptionCheck(
        name=V2, passed=v_inf > 0 and shell_min >= v_inf - tol, witness=shell_min, bound=v_inf - tol,
        detail=f"declared Vinf={v_inf:g}, outer {SHELL_FRACTION:.0%} shell minimum",
    )


def _sample_grid(model: ModelProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.atleast_1d(model.a_values).ravel()
    a_samples = np.unique(np.array([a.min(), np.median(a), a.max()]))
    magnitudes = np.logspace(-3, 3, 13)
    u_samples = np.concatenate([-magnitudes[::-1], magnitudes])
    t_samples = np.logspace(-3, 3, 25)
    return a_samples, u_samples, t_samples


def validate(model: ModelProblem, extra_required: Iterable[str] = ()) -> list[AssumptionCheck]:
    """Assumption table for the model; never raises on a failed assumption."""
    required = set(ALWAYS_REQUIRED) | set(extra_required)
    grid, p, s = model.grid, model.p, model.s
    checks: list[AssumptionCheck] = []

    checks.append(AssumptionCheck(name=V1, passed=model.v0 > 0, witness=model.v0, bound=0.0,
                                  detail="V0 = min V over the grid must be positive"))
    checks.append(_check_v2(model))

    a_all = np.atleast_1d(model.a_values)
    a_min, a_sup = float(np.min(a_all)), float(np.max(a_all))
    checks.append(AssumptionCheck(name=F1, passed=a_min > 0, witness=a_min, bound=0.0,
                                  detail="power family is C^1; weight must stay positive"))
    checks.append(AssumptionCheck(name=F2, passed=True, witness=0.0,
                                  detail="f(x,u) = o(u) at 0 by construction (p > 1)"))

    crit = critical_exponent(grid.dim, s)
    checks.append(AssumptionCheck(
        name=F3_SUBCRITICAL, passed=1 < p < crit, witness=p, bound=crit,
        detail="1 < p < (N+2s)/(N-2s)" + (" (bound +inf since N-2s <= 0)" if math.isinf(crit) else ""),
    ))

    a_samples, u_samples, t_samples = _sample_grid(model)
    aa, uu = np.meshgrid(a_samples, u_samples, indexing="ij")
    a2 = p * a_sup
    growth = np.abs(power_fprime(aa, uu, p)) / (a2 * np.abs(uu) ** (p - 1.0))
    checks.append(AssumptionCheck(name=F3_GROWTH, passed=bool(np.max(growth) <= 1 + RELATIVE_IDENTITY_TOL),
                                  witness=float(np.max(growth)), bound=1.0,
                                  detail=f"|f'| <= a1 + a2|u|^(p-1) with a1=0, a2=p sup a={a2:g}"))

    mu_f = model.nonlinearity.mu * power_F(aa, uu, p)
    uf = uu * power_f(aa, uu, p)
    ar_defect = float(np.max(np.abs(mu_f - uf) / np.abs(uf)))
    checks.append(AssumptionCheck(
        name=F4, passed=bool(np.all(mu_f > 0) and ar_defect <= RELATIVE_IDENTITY_TOL),
        witness=ar_defect, bound=RELATIVE_IDENTITY_TOL, detail=f"0 < mu F <= u f with mu = {p + 1:g}",
    ))

    fiber = power_f(aa[..., None], t_samples * uu[..., None], p) * uu[..., None] / t_samples
    increments = np.diff(fiber, axis=-1) / np.abs(fiber[..., 1:])
    min_increment = float(np.min(increments))
    checks.append(AssumptionCheck(name=F5, passed=min_increment > 0, witness=min_increment, bound=0.0,
                                  detail="t -> u f(x, t u)/t strictly increasing on sampled (t, u)"))

    v = model.v_values
    v_inf = model.potential.v_inf
    slack = RELATIVE_IDENTITY_TOL * max(abs(v_inf), 1.0) if math.isfinite(v_inf) else 0.0
    below = math.isfinite(v_inf) and float(np.max(v)) <= v_inf + slack
    strict = math.isfinite(v_inf) and float(np.min(v)) < v_inf - slack
    checks.append(AssumptionCheck(name=V3_V4, passed=below and strict, witness=float(np.max(v)), bound=v_inf,
                                  detail="V <= Vinf everywhere and V not identically Vinf"))

    v_origin = model.potential.at_origin(grid.dim)
    checks.append(AssumptionCheck(name=V5, passed=v_origin < v_inf, witness=v_origin, bound=v_inf,
                                  detail="V(0) < Vinf"))

    outside = grid.radius >= 0.25 * grid.extent
    tol = model.potential.spec.shell_tolerance * abs(v_inf) if math.isfinite(v_inf) else 0.0
    outside_min = float(np.min(v[outside]))
    checks.append(AssumptionCheck(name=OUTSIDE_BALL, passed=outside_min >= v_inf - tol,
                                  witness=outside_min, bound=v_inf - tol,
                                  detail="V >= Vinf outside the ball of radius L/4"))

    for check in checks:
        check.required = check.name in required
    failed = [c.name for c in checks if c.required and not c.passed]
    if failed:
        logger.warning("Model assumptions failed: %s", ", ".join(failed))
    return checks


def blocking_failures(checks: list[AssumptionCheck]) -> list[AssumptionCheck]:
    return [c for c in checks if c.required and not c.passed]
