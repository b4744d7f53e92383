"""Pydantic models and enums for fracground records."""

from __future__ import annotations

import math
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator


# --- Enums ---

class PotentialKind(str, Enum):
    CONSTANT = "constant"
    WELL = "well"
    BUMP = "bump"
    COERCIVE = "coercive"
    RESCALED = "rescaled"


class Branch(str, Enum):
    """Observed side of the compactness dichotomy."""

    CRITICAL = "critical"          # c < c_inf: the level is attained
    THRESHOLD = "threshold"        # c >= c_inf within tolerance: undecided from one run


class CheckName(str, Enum):
    POHOZAEV = "pohozaev"
    DECAY = "decay"
    LEVEL = "level"
    GN = "gn"
    SOBOLEV = "sobolev"
    CUTOFF = "cutoff"
    COMMUTATOR = "commutator"
    CONCENTRATION = "concentration"


REQUIRED_PARAMS: dict[PotentialKind, tuple[str, ...]] = {
    PotentialKind.CONSTANT: ("value",),
    PotentialKind.WELL: ("v_inf", "depth", "width"),
    PotentialKind.BUMP: ("base", "height", "width"),
    PotentialKind.COERCIVE: ("base", "coef", "power"),
    PotentialKind.RESCALED: (),
}


def finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


# --- Model description ---

class PotentialSpec(BaseModel):
    """Declarative potential V(x); `offset` is added to every kind."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: PotentialKind = PotentialKind.CONSTANT
    params: dict[str, float] = Field(default_factory=lambda: {"value": 1.0})
    offset: float = 0.0
    shell_tolerance: float = 0.05
    inner: Optional[PotentialSpec] = None
    epsilon: Optional[float] = None

    @model_validator(mode="after")
    def _check_params(self) -> PotentialSpec:
        required = REQUIRED_PARAMS[self.kind]
        missing = [k for k in required if k not in self.params]
        unknown = [k for k in self.params if k not in required]
        if missing:
            raise ValueError(f"Potential kind '{self.kind.value}' requires params {missing}")
        if unknown:
            raise ValueError(f"Potential kind '{self.kind.value}' does not accept params {unknown}")
        if self.shell_tolerance < 0:
            raise ValueError(f"shell_tolerance must be non-negative, got {self.shell_tolerance}")
        if "width" in self.params and self.params["width"] <= 0:
            raise ValueError(f"Potential width must be positive, got {self.params['width']}")
        if self.kind is PotentialKind.COERCIVE:
            if self.params["power"] <= 0 or self.params["coef"] < 0:
                raise ValueError("Coercive potential needs power > 0 and coef >= 0")
        if self.kind is PotentialKind.RESCALED:
            if self.inner is None or self.epsilon is None:
                raise ValueError("Rescaled potential needs both 'inner' and 'epsilon'")
            if self.epsilon <= 0:
                raise ValueError(f"Rescaling epsilon must be positive, got {self.epsilon}")
        elif self.inner is not None or self.epsilon is not None:
            raise ValueError(f"'inner'/'epsilon' only apply to the rescaled kind, not '{self.kind.value}'")
        return self

    def shifted(self, delta: float) -> PotentialSpec:
        return self.model_copy(update={"offset": self.offset + float(delta)})

    def rescaled(self, epsilon: float) -> PotentialSpec:
        """Wrap (or re-wrap) as V(epsilon x)."""
        if self.kind is PotentialKind.RESCALED:
            return self.model_copy(update={"epsilon": float(epsilon)})
        return PotentialSpec(kind=PotentialKind.RESCALED, params={}, inner=self, epsilon=float(epsilon))


def constant_potential(value: float) -> PotentialSpec:
    return PotentialSpec(kind=PotentialKind.CONSTANT, params={"value": float(value)})


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol_grad: float = 1e-8
    tol_nehari: float = 1e-10
    max_iters: int = 50000
    step0: float = 0.5
    backtrack: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-12
    cg_rtol: float = 1e-8
    cg_maxiter: int = 500
    seed: int = 0

    @field_validator("tol_grad", "tol_nehari", "step0", "armijo", "min_step", "cg_rtol")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError(f"must be positive, got {value}")
        return value

    @field_validator("backtrack")
    @classmethod
    def _fraction(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"backtrack must lie in (0, 1), got {value}")
        return value

    @field_validator("max_iters", "cg_maxiter")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"must be >= 1, got {value}")
        return value


# --- Results ---

class AssumptionCheck(BaseModel):
    name: str
    passed: bool
    witness: Optional[float] = None
    bound: Optional[float] = None
    required: bool = False
    detail: str = ""

    @field_validator("witness", "bound", mode="before")
    @classmethod
    def _finite(cls, value: Any) -> Optional[float]:
        return finite_or_none(value)


class EnergyBreakdown(BaseModel):
    model_config = ConfigDict(frozen=True)

    kinetic: float
    potential: float
    nonlinear: float
    total: float

    @classmethod
    def from_parts(cls, kinetic: float, potential: float, nonlinear: float) -> EnergyBreakdown:
        return cls(kinetic=kinetic, potential=potential, nonlinear=nonlinear,
                   total=kinetic + potential - nonlinear)


class GroundStateSummary(BaseModel):
    level: float
    grad_norm: float
    nehari_res: float
    iters: int
    converged: bool
    message: str = ""
    positivity_ok: Optional[bool] = None
    reflected_start: bool = False
    descent_monotone: bool = True


class LevelEstimate(BaseModel):
    level: float
    best_index: int
    levels: list[Optional[float]]
    non_converged: int


class SweepPoint(BaseModel):
    index: int
    parameter: float
    level: Optional[float] = None
    converged: bool = False
    summary: Optional[GroundStateSummary] = None
    error: Optional[str] = None


class SweepResult(BaseModel):
    """Levels c(parameter) in input order; failed points keep level None."""

    parameter_name: str
    parameters: list[float]
    levels: list[Optional[float]]
    converged: list[bool]
    points: list[SweepPoint]
    reference_level: Optional[float] = None
    margins: list[Optional[float]] = Field(default_factory=list)
    branches: list[Optional[Branch]] = Field(default_factory=list)

    _states: list = PrivateAttr(default_factory=list)

    @model_validator(mode="after")
    def _equal_lengths(self) -> SweepResult:
        n = len(self.parameters)
        if not (len(self.levels) == len(self.converged) == len(self.points) == n):
            raise ValueError("Sweep lists must have equal length")
        return self

    @property
    def states(self) -> list:
        """Ground states per point (None for failures); not serialized."""
        return self._states

    def is_monotone(self, slack: float = 1e-6) -> bool:
        """Levels nondecreasing in the parameter (sorted), ignoring failed points."""
        pairs = sorted((p, c) for p, c in zip(self.parameters, self.levels) if c is not None)
        return all(b >= a - slack for (_, a), (_, b) in zip(pairs, pairs[1:]))

    def continuity_constant(self, base_index: int = 0) -> Optional[float]:
        """max |c(p) - c(p0)| / |p - p0| over successful points."""
        base_p, base_c = self.parameters[base_index], self.levels[base_index]
        if base_c is None:
            return None
        ratios = [abs(c - base_c) / abs(p - base_p)
                  for p, c in zip(self.parameters, self.levels) if c is not None and p != base_p]
        return max(ratios) if ratios else None


class InfinityComparison(BaseModel):
    level: float
    level_at_infinity: float
    upper_bound: float
    gap: float
    branch: Branch


class EmpiricalConstant(BaseModel):
    """Max of a ratio over a sample set, with its stability under halving the set."""

    max_ratio: float
    first_half_max: float
    count: int
    stable: bool


# --- Verification report ---

class CheckRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    name: str
    inputs_digest: str
    quantities: dict[str, Any] = Field(default_factory=dict)
    residual: Optional[float] = None
    tolerance: float
    passed: Optional[bool] = Field(default=None, alias="pass")
    applicable: bool = True
    note: str = ""

    @model_validator(mode="after")
    def _pass_matches_residual(self) -> CheckRecord:
        if not self.applicable:
            if self.passed is not None:
                raise ValueError(f"Check '{self.name}' is not applicable and cannot carry a pass flag")
            return self
        expected = self.residual is not None and self.residual <= self.tolerance
        if self.passed is None:
            self.passed = expected
        elif self.passed != expected:
            raise ValueError(f"Check '{self.name}': pass flag disagrees with residual/tolerance")
        return self


class VerificationReport(BaseModel):
    command: str
    created_at: str
    checks: list[CheckRecord] = Field(default_factory=list)
    model: dict[str, Any] = Field(default_factory=dict)
    versions: dict[str, str] = Field(default_factory=dict)
    summary: dict[str, Any] = Field(default_factory=dict)

    def add(self, check: CheckRecord) -> CheckRecord:
        self.checks.append(check)
        return check

    @property
    def failed(self) -> list[CheckRecord]:
        return [c for c in self.checks if c.passed is False]

    def all_passed(self) -> bool:
        return not self.failed

    def summarize(self, **extra: Any) -> None:
        self.summary = {
            "total": len(self.checks),
            "passed": sum(1 for c in self.checks if c.passed is True),
            "failed": len(self.failed),
            "not_applicable": sum(1 for c in self.checks if not c.applicable),
            **extra,
        }


PotentialSpec.model_rebuild()
