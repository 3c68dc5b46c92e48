"""
Run configuration: one pydantic model per INI section.
"""

import configparser
import logging
from pathlib import Path
from typing import Literal, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

SECTION_ORDER = ("grid", "physics", "scheme", "initial", "output", "model_h")


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class GridSection(_Section):
    n: int = Field(description="Cells per direction (power of two >= 8)")
    L: float = Field(1.0, gt=0, description="Side length of the torus")

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, n: int) -> int:
        if n < 8 or n & (n - 1):
            raise ValueError("n must be a power of two >= 8")
        return n


class PhysicsSection(_Section):
    nu_minus: float = Field(1.0, gt=0, description="Viscosity of phase 0")
    nu_plus: float = Field(1.0, gt=0, description="Viscosity of phase 1")
    kappa: float = Field(1.0, gt=0, description="Surface tension")
    m: float = Field(1.0, gt=0, description="Mobility")


class SchemeSection(_Section):
    h: float = Field(gt=0, description="Time step")
    horizon: float = Field(gt=0, description="Final time T")
    delta: float | None = Field(None, gt=0, description="Mollifier width (default 2 dx)")
    anneal_sweeps: int = Field(4, ge=1)
    anneal_temp_init: float = Field(0.05, ge=0)
    anneal_temp_decay: float = Field(0.5, gt=0, lt=1)
    anneal_seed: int = Field(0, ge=0)
    anneal_no_improve_window: int = Field(2, ge=1)
    picard_tol: float = Field(1e-8, gt=0)
    picard_max: int = Field(50, ge=1)
    cg_tol: float = Field(1e-10, gt=0)


class InitialSection(_Section):
    phase_shape: Literal["stripe", "disk", "file"] = "disk"
    radius: float = Field(0.25, gt=0, description="Disk radius")
    stripe_width: float = Field(0.5, gt=0, description="Stripe width")
    phase_file: Path | None = None
    velocity: Literal["zero", "shear", "file"] = "zero"
    shear_amplitude: float = Field(1.0, description="Amplitude of the shear mode")
    velocity_file: Path | None = None
    seed: int | None = Field(None, ge=0, description="Run seed; replaces scheme.anneal_seed when set")

    @model_validator(mode="after")
    def _files_present(self) -> Self:
        if self.phase_shape == "file" and self.phase_file is None:
            raise ValueError("phase_shape = file requires phase_file")
        if self.velocity == "file" and self.velocity_file is None:
            raise ValueError("velocity = file requires velocity_file")
        return self


class OutputSection(_Section):
    directory: Path = Path("runs/default")
    dump_every: int = Field(0, ge=0, description="Dump fields every k steps (0 disables)")
    ledger_path: Path | None = Field(None, description="Ledger CSV (default <directory>/ledger.csv)")
    pgm_preview: bool = Field(False, description="Write PGM previews with every phase dump")

    @property
    def resolved_ledger_path(self) -> Path:
        return self.ledger_path if self.ledger_path is not None else self.directory / "ledger.csv"


class ModelHSection(_Section):
    dt: float | None = Field(None, gt=0, description="Diffuse time step (default h)")
    mobility: float | None = Field(None, gt=0, description="Mobility override (default m)")
    stabilization: float | None = Field(None, ge=0)
    threshold: float | None = Field(None, gt=0, description="Largest dt with enforced energy decay")


class RunConfig(_Section):
    """Complete validated run configuration."""

    grid: GridSection
    physics: PhysicsSection = Field(default_factory=PhysicsSection)
    scheme: SchemeSection
    initial: InitialSection = Field(default_factory=InitialSection)
    output: OutputSection = Field(default_factory=OutputSection)
    model_h: ModelHSection = Field(default_factory=ModelHSection)

    @property
    def dx(self) -> float:
        return self.grid.L / self.grid.n

    @property
    def delta(self) -> float:
        return self.scheme.delta if self.scheme.delta is not None else 2.0 * self.dx

    @property
    def steps(self) -> int:
        """Number of steps ``ceil(T / h)``, robust to rounding of T / h."""
        ratio = self.scheme.horizon / self.scheme.h
        nearest = round(ratio)
        return nearest if abs(ratio - nearest) < 1e-9 * max(1.0, ratio) else int(ratio) + 1


def _format_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"])
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, empty_lines_in_values=False)
    parser.optionxform = str  # keep key case, e.g. "L"
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigurationError(str(e), source)

    unknown = set(parser.sections()) - set(SECTION_ORDER)
    if unknown:
        raise ConfigurationError(f"unknown sections: {', '.join(sorted(unknown))}", source)

    data = {section: dict(parser.items(section)) for section in parser.sections()}
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(_format_error(e), source)
    logger.debug(f"Loaded run config from {source}: n={config.grid.n}, h={config.scheme.h}")
    return config


def load_run_config(path: Path) -> RunConfig:
    """Read and validate an INI run configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config ({e})", str(path))
    return parse_run_config(text, str(path))


def dump_run_config(config: RunConfig, path: Path) -> Path:
    """Write the configuration back as INI so a run directory is self-describing."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in SECTION_ORDER:
        values = getattr(config, section).model_dump(exclude_none=True)
        parser[section] = {key: repr(v) if isinstance(v, float) else str(v) for key, v in values.items()}
    with path.open("w", encoding="utf-8") as handle:
        parser.write(handle)
    return path
