"""
Periodic grid, discrete fields and spectral differential operators.

Arrays are stored row-major as ``values[iy, ix]`` so that x varies fastest.
Node ``(iy, ix)`` sits at ``(ix * dx, iy * dx)``. Spectral operators act on the
half spectrum returned by ``numpy.fft.rfft2``; the last axis (x) is the
halved one.

Derivatives use wavenumbers with the Nyquist entry set to zero, so they map
real fields to real fields. The Laplacian symbol and all Parseval norms use the
full ``|k|^2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Self

import numpy as np
from numpy.typing import NDArray

from src.config import get_settings
from src.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]


@dataclass(frozen=True)
class Grid:
    """Uniform n x n periodic grid on the torus of side ``length``."""

    n: int
    length: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 8 or self.n & (self.n - 1):
            raise ConfigurationError(f"grid size n={self.n} must be a power of two >= 8")
        if not self.length > 0:
            raise ConfigurationError(f"domain length L={self.length} must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.n, self.n // 2 + 1)

    @cached_property
    def coordinates(self) -> tuple[FloatArray, FloatArray]:
        """Node coordinates ``(X, Y)``, each of shape (n, n)."""
        axis = np.arange(self.n, dtype=np.float64) * self.dx
        x, y = np.meshgrid(axis, axis, indexing="xy")
        return x, y

    @cached_property
    def _mode_indices(self) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        ky = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        kx = np.fft.rfftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        return ky[:, None] * np.ones_like(kx)[None, :], np.ones_like(ky)[:, None] * kx[None, :]

    @cached_property
    def wavenumbers(self) -> tuple[FloatArray, FloatArray]:
        """Full physical wavenumbers ``(kx, ky)`` on the half spectrum."""
        iy, ix = self._mode_indices
        scale = 2.0 * np.pi / self.length
        return scale * ix.astype(np.float64), scale * iy.astype(np.float64)

    @cached_property
    def derivative_wavenumbers(self) -> tuple[FloatArray, FloatArray]:
        """Wavenumbers used for first derivatives, Nyquist entries zeroed."""
        kx, ky = self.wavenumbers
        iy, ix = self._mode_indices
        nyquist = self.n // 2
        return np.where(ix == nyquist, 0.0, kx), np.where(np.abs(iy) == nyquist, 0.0, ky)

    @cached_property
    def k_squared(self) -> FloatArray:
        kx, ky = self.wavenumbers
        return kx * kx + ky * ky

    @cached_property
    def parseval_weights(self) -> FloatArray:
        """Multiplicity of each half-spectrum entry in the full spectrum."""
        weights = np.full(self.spectral_shape, 2.0)
        weights[:, 0] = 1.0
        weights[:, -1] = 1.0
        return weights

    @cached_property
    def dealias_mask(self) -> NDArray[np.bool_]:
        cutoff = get_settings().numerics.dealias_fraction * self.n / 2
        iy, ix = self._mode_indices
        return (np.abs(ix) < cutoff) & (np.abs(iy) < cutoff)

    def forward(self, values: FloatArray) -> ComplexArray:
        return np.fft.rfft2(values)

    def inverse(self, spectrum: ComplexArray) -> FloatArray:
        return np.fft.irfft2(spectrum, s=self.shape)

    def spectral_sum(self, a_hat: ComplexArray, b_hat: ComplexArray, symbol: FloatArray | None = None) -> float:
        """Grid sum ``sum_x a(x) (S b)(x)`` evaluated on the half spectrum."""
        product = (a_hat * np.conj(b_hat)).real * self.parseval_weights
        if symbol is not None:
            product *= symbol
        return float(product.sum()) / (self.n * self.n)

    def zeros(self) -> ScalarField:
        return ScalarField(self, np.zeros(self.shape))

    def constant(self, value: float) -> ScalarField:
        return ScalarField(self, np.full(self.shape, float(value)))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real scalar field sampled on the grid nodes; values are read-only."""

    grid: Grid
    values: FloatArray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, func) -> Self:
        x, y = grid.coordinates
        return cls(grid, np.broadcast_to(func(x, y), grid.shape))

    def _coerce(self, other: ScalarField | float) -> FloatArray | float:
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ConfigurationError("fields live on different grids")
            return other.values
        return float(other)

    def __add__(self, other: ScalarField | float) -> ScalarField:
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other: ScalarField | float) -> ScalarField:
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other: float) -> ScalarField:
        return ScalarField(self.grid, float(other) - self.values)

    def __mul__(self, other: ScalarField | float) -> ScalarField:
        """Pointwise product, without dealiasing (see :func:`product`)."""
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> ScalarField:
        return ScalarField(self.grid, self.values / float(scalar))

    def __neg__(self) -> ScalarField:
        return ScalarField(self.grid, -self.values)

    def mean(self) -> float:
        return float(self.values.mean())

    def integral(self) -> float:
        return float(self.values.sum()) * self.grid.cell_area

    def inner(self, other: ScalarField) -> float:
        return float(np.sum(self.values * self._coerce(other))) * self.grid.cell_area

    def l2_norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def spectrum(self) -> ComplexArray:
        return self.grid.forward(self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Pair of scalar components on a common grid."""

    x: ScalarField
    y: ScalarField

    def __post_init__(self) -> None:
        if self.x.grid != self.y.grid:
            raise ConfigurationError("vector components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.x.grid

    @classmethod
    def zeros(cls, grid: Grid) -> Self:
        return cls(grid.zeros(), grid.zeros())

    @classmethod
    def from_arrays(cls, grid: Grid, x: FloatArray, y: FloatArray) -> Self:
        return cls(ScalarField(grid, x), ScalarField(grid, y))

    def __add__(self, other: VectorField) -> VectorField:
        return VectorField(self.x + other.x, self.y + other.y)

    def __sub__(self, other: VectorField) -> VectorField:
        return VectorField(self.x - other.x, self.y - other.y)

    def __mul__(self, scalar: float) -> VectorField:
        return VectorField(self.x * scalar, self.y * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> VectorField:
        return VectorField(self.x / scalar, self.y / scalar)

    def __neg__(self) -> VectorField:
        return VectorField(-self.x, -self.y)

    def scaled_by(self, weight: ScalarField) -> VectorField:
        """Pointwise multiplication by a scalar field, without dealiasing."""
        return VectorField(self.x * weight, self.y * weight)

    def dot(self, other: VectorField) -> ScalarField:
        return self.x * other.x + self.y * other.y

    def inner(self, other: VectorField) -> float:
        return self.x.inner(other.x) + self.y.inner(other.y)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def magnitude(self) -> ScalarField:
        return ScalarField(self.grid, np.hypot(self.x.values, self.y.values))

    def max_abs(self) -> float:
        return max(self.x.max_abs(), self.y.max_abs())

    def flatten(self) -> FloatArray:
        return np.concatenate([self.x.values.ravel(), self.y.values.ravel()])

    @classmethod
    def unflatten(cls, grid: Grid, vector: FloatArray) -> Self:
        size = grid.n * grid.n
        return cls.from_arrays(
            grid, vector[:size].reshape(grid.shape), vector[size:].reshape(grid.shape)
        )


def gradient(f: ScalarField) -> VectorField:
    grid = f.grid
    kx, ky = grid.derivative_wavenumbers
    f_hat = f.spectrum()
    return VectorField.from_arrays(
        grid, grid.inverse(1j * kx * f_hat), grid.inverse(1j * ky * f_hat)
    )


def divergence(v: VectorField) -> ScalarField:
    grid = v.grid
    kx, ky = grid.derivative_wavenumbers
    return ScalarField(grid, grid.inverse(1j * (kx * v.x.spectrum() + ky * v.y.spectrum())))


def laplacian(f: ScalarField) -> ScalarField:
    grid = f.grid
    return ScalarField(grid, grid.inverse(-grid.k_squared * f.spectrum()))


def mollify(f: ScalarField, delta: float) -> ScalarField:
    """Convolution with the periodic Gaussian of width ``delta``."""
    if delta <= 0:
        raise ConfigurationError(f"mollifier width delta={delta} must be positive")
    grid = f.grid
    multiplier = np.exp(-0.5 * delta * delta * grid.k_squared)
    return ScalarField(grid, grid.inverse(multiplier * f.spectrum()))


def mollifier_kernel(grid: Grid, delta: float) -> ScalarField:
    """Grid values of the mollifier applied to a unit cell at the origin."""
    impulse = np.zeros(grid.shape)
    impulse[0, 0] = 1.0
    return mollify(ScalarField(grid, impulse), delta)


def dealias(f: ScalarField) -> ScalarField:
    """Zero the top third of the spectrum in each direction."""
    grid = f.grid
    return ScalarField(grid, grid.inverse(grid.dealias_mask * f.spectrum()))


def product(a: ScalarField, b: ScalarField) -> ScalarField:
    return dealias(a * b)


def vector_product(weight: ScalarField, v: VectorField) -> VectorField:
    """Dealiased pointwise product of a scalar and a vector field."""
    return VectorField(product(weight, v.x), product(weight, v.y))


def dirichlet_inner(a: ScalarField, b: ScalarField) -> float:
    """``int grad a . grad b`` evaluated with the full spectral symbol."""
    grid = a.grid
    return grid.spectral_sum(a.spectrum(), b.spectrum(), grid.k_squared) * grid.cell_area


def dirichlet_energy(f: ScalarField) -> float:
    """``||grad f||^2`` evaluated with the full spectral symbol."""
    return dirichlet_inner(f, f)


def symmetric_gradient(v: VectorField) -> tuple[tuple[ScalarField, ScalarField], tuple[ScalarField, ScalarField]]:
    """Components ``D_ij = (d_j v_i + d_i v_j) / 2`` of the rate of strain."""
    gx = gradient(v.x)
    gy = gradient(v.y)
    off_diagonal = (gx.y + gy.x) * 0.5
    return (gx.x, off_diagonal), (off_diagonal, gy.y)
