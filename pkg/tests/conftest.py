"""Shared fixtures."""

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from src.core.grid import Grid
from src.metrics.solver_metrics import solver_metrics
from src.models.run_config import RunConfig, parse_run_config


@pytest.fixture(autouse=True)
def _reset_metrics():
    solver_metrics.reset()
    yield


@pytest.fixture
def grid32() -> Grid:
    return Grid(32)


@pytest.fixture
def grid64() -> Grid:
    return Grid(64)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def config_text(directory: Path, **sections: dict[str, object]) -> str:
    """INI text for a small run; ``sections`` override or extend the defaults."""
    base: dict[str, dict[str, object]] = {
        "grid": {"n": 32, "L": 1.0},
        "physics": {"nu_minus": 1.0, "nu_plus": 1.0, "kappa": 1.0, "m": 1.0},
        "scheme": {"h": 1e-3, "horizon": 3e-3, "anneal_sweeps": 2},
        "initial": {"phase_shape": "disk", "radius": 0.25, "velocity": "zero"},
        "output": {"directory": directory},
    }
    for name, values in sections.items():
        base.setdefault(name, {}).update(values)
    lines = []
    for name, values in base.items():
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {value}" for key, value in values.items())
        lines.append("")
    return "\n".join(lines)


@pytest.fixture
def make_config(tmp_path: Path) -> Callable[..., RunConfig]:
    def build(**sections: dict[str, object]) -> RunConfig:
        return parse_run_config(config_text(tmp_path / "run", **sections))

    return build


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    def build(name: str = "run.ini", **sections: dict[str, object]) -> Path:
        path = tmp_path / name
        path.write_text(config_text(tmp_path / "out", **sections), encoding="utf-8")
        return path

    return build
