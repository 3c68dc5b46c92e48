"""
Periodic Poisson solves, the H^{-1} norm and the Leray projection.

The workspace caches the spectral symbols for one grid and never changes
after construction, so it can be shared between threads.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from src.config import get_settings
from src.core.grid import FloatArray, Grid, ScalarField, VectorField
from src.exceptions import CompatibilityError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HNegWorkspace:
    """Cached inverse-Laplacian and projection symbols for a grid."""

    grid: Grid
    compat_tolerance: float = field(
        default_factory=lambda: get_settings().numerics.compat_tolerance
    )

    @cached_property
    def inverse_symbol(self) -> FloatArray:
        """``1 / |k|^2`` with the zero mode mapped to zero."""
        k2 = self.grid.k_squared
        symbol = np.zeros_like(k2)
        np.divide(1.0, k2, out=symbol, where=k2 > 0)
        return symbol

    @cached_property
    def projection_symbol(self) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Entries ``(p_xx, p_xy, p_yy)`` of ``I - k k^T / |k|^2`` on derivative wavenumbers."""
        kx, ky = self.grid.derivative_wavenumbers
        kd2 = kx * kx + ky * ky
        inv = np.zeros_like(kd2)
        np.divide(1.0, kd2, out=inv, where=kd2 > 0)
        return 1.0 - kx * kx * inv, -kx * ky * inv, 1.0 - ky * ky * inv

    @cached_property
    def green_function(self) -> FloatArray:
        """Values of ``(-Delta)^{-1}`` applied to a unit cell at the origin."""
        return self.grid.inverse(self.inverse_symbol.astype(np.complex128))

    def check_compatible(self, f: ScalarField) -> None:
        mean = f.mean()
        scale = f.max_abs()
        if abs(mean) > self.compat_tolerance * scale:
            raise CompatibilityError(mean, scale, self.compat_tolerance)

    def inv_neg_laplacian(self, f: ScalarField) -> ScalarField:
        """Mean-zero solution u of ``-Delta u = f``."""
        self.check_compatible(f)
        return ScalarField(self.grid, self.grid.inverse(self.inverse_symbol * f.spectrum()))

    def hneg_inner(self, f: ScalarField, g: ScalarField) -> float:
        self.check_compatible(f)
        self.check_compatible(g)
        return (
            self.grid.spectral_sum(f.spectrum(), g.spectrum(), self.inverse_symbol)
            * self.grid.cell_area
        )

    def hneg_norm(self, f: ScalarField) -> float:
        return float(np.sqrt(max(self.hneg_inner(f, f), 0.0)))

    def leray_project(self, u: VectorField) -> VectorField:
        """L^2-orthogonal projection onto discretely divergence-free fields."""
        p_xx, p_xy, p_yy = self.projection_symbol
        ux = u.x.spectrum()
        uy = u.y.spectrum()
        return VectorField.from_arrays(
            self.grid,
            self.grid.inverse(p_xx * ux + p_xy * uy),
            self.grid.inverse(p_xy * ux + p_yy * uy),
        )


@lru_cache(maxsize=16)
def workspace_for(grid: Grid) -> HNegWorkspace:
    logger.debug(f"🔨 Building spectral workspace for n={grid.n}, L={grid.length}")
    return HNegWorkspace(grid)


def inv_neg_laplacian(f: ScalarField) -> ScalarField:
    return workspace_for(f.grid).inv_neg_laplacian(f)


def hneg_norm(f: ScalarField) -> float:
    return workspace_for(f.grid).hneg_norm(f)


def hneg_inner(f: ScalarField, g: ScalarField) -> float:
    return workspace_for(f.grid).hneg_inner(f, g)


def leray_project(u: VectorField) -> VectorField:
    return workspace_for(u.grid).leray_project(u)
