"""fracground configuration — process settings from .env and the TOML run-config schema."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import tomli_w
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from fracground.schemas import CheckName, PotentialSpec, SolverConfig


def _project_root() -> Path:
    """Return the project root (parent of fracground/)."""
    return Path(__file__).resolve().parent.parent


class ConfigError(ValueError):
    """Run configuration could not be read or validated."""


# ----------------------------------------------------------------------
# Process settings
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Settings:
    # Outputs
    output_dir: str = "outputs"

    # Workers
    jobs: int = 1

    # Logging
    log_level: str = "INFO"

    project_root: Path = field(default_factory=_project_root)

    def abs_output_dir(self, override: Optional[str] = None) -> Path:
        p = Path(override or self.output_dir)
        return p if p.is_absolute() else Path.cwd() / p


def load_settings() -> Settings:
    """Load settings from .env file and environment variables."""
    env_path = _project_root() / ".env"
    load_dotenv(env_path)

    return Settings(
        output_dir=os.getenv("FRACGROUND_OUT", "outputs"),
        jobs=max(1, int(os.getenv("FRACGROUND_JOBS", str(os.cpu_count() or 1)))),
        log_level=os.getenv("LOG_LEVEL", "INFO"),
        project_root=_project_root(),
    )


# ----------------------------------------------------------------------
# Run configuration
# ----------------------------------------------------------------------

class InitialWave(str, Enum):
    GROUND_STATE = "ground_state"
    GAUSSIAN = "gaussian"


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SweepBlock(_Block):
    shifts: list[float] = Field(default_factory=lambda: [0.0, 1.0])
    epsilons: list[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25, 0.1])


class EvolveBlock(_Block):
    dt: float = 1e-3
    steps: int = 10000
    record_every: int = 10
    snapshot_every: int = 0
    initial: InitialWave = InitialWave.GROUND_STATE
    amplitude: float = 1.0
    width: float = 1.0

    @field_validator("dt")
    @classmethod
    def _positive_dt(cls, value: float) -> float:
        if value <= 0:
            raise ValueError(f"dt must be positive, got {value}")
        return value

    @field_validator("record_every")
    @classmethod
    def _positive_stride(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"record_every must be >= 1, got {value}")
        return value


def _default_checks() -> list[CheckName]:
    return [CheckName.POHOZAEV, CheckName.DECAY, CheckName.LEVEL, CheckName.GN,
            CheckName.CUTOFF, CheckName.COMMUTATOR]


class VerifyBlock(_Block):
    checks: list[CheckName] = Field(default_factory=_default_checks)
    samples: int = 1000
    q: float = 2.0
    radii: list[float] = Field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0])
    field: Optional[str] = None
    decay_periodic: bool = True
    decay_window: Optional[tuple[float, float]] = None
    commutator_radius: float = 10.0
    concentration_radius: float = 5.0
    level_starts: int = 3


class RunConfig(_Block):
    """Everything one run needs; dotted TOML keys map onto the nested blocks."""

    dim: int = 1
    L: float = 160.0
    M: int = 8192
    s: float = 0.5
    p: float = 2.0
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    weight: Union[float, PotentialSpec] = 1.0
    positive_mode: bool = False
    epsilon: Optional[float] = None
    dealias: bool = False

    solver: SolverConfig = Field(default_factory=SolverConfig)
    sweep: SweepBlock = Field(default_factory=SweepBlock)
    evolve: EvolveBlock = Field(default_factory=EvolveBlock)
    verify: VerifyBlock = Field(default_factory=VerifyBlock)

    output_dir: Optional[str] = None
    seed: Optional[int] = None

    def effective_potential(self) -> PotentialSpec:
        """The potential with the top-level `epsilon` applied as V(epsilon x)."""
        return self.potential.rescaled(self.epsilon) if self.epsilon is not None else self.potential


def _format_validation(exc: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors())


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from exc


def load_run_config(path: Optional[Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}") from exc
    return parse_run_config(text, str(path))


def resolve_run_config(
    config: RunConfig,
    settings: Settings,
    out: Optional[str] = None,
    seed: Optional[int] = None,
) -> RunConfig:
    """Apply precedence: CLI flag > config file > environment > default. The top-level seed wins over solver.seed."""
    seed = seed if seed is not None else config.seed
    solver = config.solver.model_copy(update={"seed": seed}) if seed is not None else config.solver
    output_dir = out or config.output_dir or settings.output_dir
    return config.model_copy(update={"seed": seed, "solver": solver, "output_dir": str(output_dir)})


def dump_run_config(config: RunConfig) -> str:
    return tomli_w.dumps(config.model_dump(mode="json", exclude_none=True))
