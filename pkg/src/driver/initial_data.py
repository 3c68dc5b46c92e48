"""
Initial phase and velocity builders.
"""

import logging

import numpy as np

from src.core.field_io import read_field
from src.core.grid import Grid, ScalarField, VectorField
from src.core.hneg import leray_project
from src.exceptions import ConfigurationError, FieldFormatError
from src.interface.geometry import BinaryPhase
from src.models.run_config import RunConfig

logger = logging.getLogger(__name__)


def shear_mode(grid: Grid, amplitude: float = 1.0) -> VectorField:
    """``(A sin(2 pi y / L), 0)``, divergence-free."""
    k = 2.0 * np.pi / grid.length
    return VectorField(
        ScalarField.from_function(grid, lambda x, y: amplitude * np.sin(k * y)), grid.zeros()
    )


def build_grid(config: RunConfig) -> Grid:
    return Grid(config.grid.n, config.grid.L)


def build_initial_phase(config: RunConfig, grid: Grid) -> BinaryPhase:
    """
    Phase from the ``[initial]`` section.

    Raises:
        ConfigurationError: if the phase is empty, full or read from a mismatched dump
    """
    initial = config.initial
    match initial.phase_shape:
        case "stripe":
            phase = BinaryPhase.horizontal_stripe(grid, initial.stripe_width)
        case "disk":
            phase = BinaryPhase.disk(grid, initial.radius)
        case "file":
            if initial.phase_file is None:
                raise ConfigurationError("phase_shape = file requires phase_file", "initial")
            field = read_field(initial.phase_file, grid.length)
            if not isinstance(field, ScalarField) or field.grid != grid:
                raise FieldFormatError(str(initial.phase_file), "expected a scalar field on the run grid")
            phase = BinaryPhase.from_field(field)

    if not 0 < phase.mass < grid.n * grid.n:
        raise ConfigurationError(
            f"initial phase has {phase.mass} of {grid.n * grid.n} cells; both phases must be present",
            "initial",
        )
    logger.info(f"🚀 Initial phase '{initial.phase_shape}': {phase.mass} cells")
    return phase


def build_initial_velocity(config: RunConfig, grid: Grid) -> VectorField:
    """Velocity from the ``[initial]`` section, projected onto divergence-free fields."""
    initial = config.initial
    match initial.velocity:
        case "zero":
            return VectorField.zeros(grid)
        case "shear":
            return shear_mode(grid, initial.shear_amplitude)
        case "file":
            if initial.velocity_file is None:
                raise ConfigurationError("velocity = file requires velocity_file", "initial")
            field = read_field(initial.velocity_file, grid.length)
            if not isinstance(field, VectorField) or field.grid != grid:
                raise FieldFormatError(str(initial.velocity_file), "expected a vector field on the run grid")
            return leray_project(field)
