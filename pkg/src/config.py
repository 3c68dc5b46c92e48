"""
Application settings for the NSMS simulator.
Loads from environment / .env file with defaults.
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class BaseNestedSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", case_sensitive=False, extra="ignore"
    )


class ProjectSettings(BaseNestedSettings):
    """Project metadata."""

    project_name: str = Field("nsms-simulator", description="Project name")
    version: str = Field("0.3.0", description="Version")
    environment: str = Field("development", description="Environment")
    debug: bool = Field(False, description="Debug mode")


class LoggingSettings(BaseNestedSettings):
    """Logging configuration."""

    log_level: str = Field("INFO", description="Log level")
    log_file: str | None = Field(None, description="Rotating log file (disabled when unset)")
    log_max_bytes: int = Field(10485760, description="Max log file size")
    log_backup_count: int = Field(5, description="Backup count")
    log_format: str = Field(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s", description="Log format"
    )
    log_json_enabled: bool = Field(False, description="Write JSON lines to the log file")


class NumericsSettings(BaseNestedSettings):
    """Tolerances and thresholds shared by the numerical kernels."""

    compat_tolerance: float = Field(
        1e-10, gt=0, description="Relative mean tolerance for periodic Poisson data"
    )
    normal_threshold: float = Field(
        1e-3, gt=0, lt=1, description="Fraction of max|grad chi_delta| below which normals vanish"
    )
    lambda_floor: float = Field(1e-8, gt=0, description="Lagrange multiplier denominator floor")
    energy_tolerance: float = Field(1e-8, gt=0, description="Relative slack of energy inequalities")
    dealias_fraction: float = Field(
        2.0 / 3.0, gt=0, le=1, description="Retained fraction of the spectrum for products"
    )
    mollifier_window: float = Field(
        6.0, gt=0, description="Local perimeter update window radius in units of delta"
    )
    bookkeeping_tolerance: float = Field(
        1e-8, gt=0, description="Relative drift allowed between incremental and exact F^h"
    )


class SweepSettings(BaseNestedSettings):
    """Interface-width sweep configuration."""

    sweep_max_concurrent: int = Field(4, ge=1, description="Concurrent trajectories")


class Settings(BaseSettings):
    """
    Combined settings class that aggregates all sub-settings.
    """

    project: ProjectSettings = Field(default_factory=ProjectSettings)  # pyright: ignore[reportArgumentType]
    logging: LoggingSettings = Field(default_factory=LoggingSettings)  # pyright: ignore[reportArgumentType]
    numerics: NumericsSettings = Field(default_factory=NumericsSettings)  # pyright: ignore[reportArgumentType]
    sweep: SweepSettings = Field(default_factory=SweepSettings)  # pyright: ignore[reportArgumentType]

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        env_nested_delimiter="__",
        extra="ignore",
    )


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
