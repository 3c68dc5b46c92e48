"""
Binary phases and the geometry of their mollified interfaces.

Every quantity here is computed from ``chi_delta = mollify(chi, delta)``:
the perimeter is its total variation, normals are its normalized gradient and
curvatures come from its level sets.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Self

import numpy as np

from src.config import get_settings
from src.core.grid import (
    FloatArray,
    Grid,
    ScalarField,
    VectorField,
    dirichlet_energy,
    divergence,
    gradient,
    mollify,
    vector_product,
)
from src.core.hneg import workspace_for
from src.exceptions import ConfigurationError, DegeneratePhaseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BinaryPhase:
    """Indicator of the phase {chi = 1} with a conserved cell count."""

    grid: Grid
    chi: np.ndarray

    def __post_init__(self) -> None:
        chi = np.asarray(self.chi)
        if chi.shape != self.grid.shape:
            raise ConfigurationError(f"phase shape {chi.shape} does not match grid {self.grid.shape}")
        if not np.isin(chi, (0, 1)).all():
            raise ConfigurationError("phase values must be 0 or 1")
        chi = chi.astype(np.uint8, copy=True)
        chi.setflags(write=False)
        object.__setattr__(self, "chi", chi)

    @property
    def mass(self) -> int:
        """Number of cells with chi = 1."""
        return int(self.chi.sum(dtype=np.int64))

    @property
    def area(self) -> float:
        return self.mass * self.grid.cell_area

    def as_field(self) -> ScalarField:
        return ScalarField(self.grid, self.chi.astype(np.float64))

    def symmetric_difference(self, other: Self) -> int:
        return int(np.count_nonzero(self.chi != other.chi))

    @classmethod
    def from_field(cls, field: ScalarField, threshold: float = 0.5) -> Self:
        return cls(field.grid, (field.values >= threshold).astype(np.uint8))

    @classmethod
    def horizontal_stripe(cls, grid: Grid, width: float, center: float | None = None) -> Self:
        """Cells with ``|y - center| < width / 2`` (periodically)."""
        center = grid.length / 2 if center is None else center
        _, y = grid.coordinates
        offset = np.abs((y - center + grid.length / 2) % grid.length - grid.length / 2)
        return cls(grid, (offset < width / 2).astype(np.uint8))

    @classmethod
    def disk(cls, grid: Grid, radius: float, center: tuple[float, float] | None = None) -> Self:
        cx, cy = (grid.length / 2, grid.length / 2) if center is None else center
        x, y = grid.coordinates
        half = grid.length / 2
        dx = (x - cx + half) % grid.length - half
        dy = (y - cy + half) % grid.length - half
        return cls(grid, (dx * dx + dy * dy <= radius * radius).astype(np.uint8))


@dataclass
class GeometryReport:
    """Interface diagnostics of a phase at mollifier width delta."""

    perimeter: float
    mass: int
    area: float
    interface_cells: int
    mean_curvature: float


@dataclass(frozen=True)
class _MollifiedInterface:
    chi_delta: ScalarField
    grad: VectorField
    magnitude: FloatArray
    band: np.ndarray


def _mollified(chi: BinaryPhase | ScalarField, delta: float) -> _MollifiedInterface:
    field = chi.as_field() if isinstance(chi, BinaryPhase) else chi
    chi_delta = mollify(field, delta)
    grad = gradient(chi_delta)
    magnitude = np.hypot(grad.x.values, grad.y.values)
    peak = float(magnitude.max())
    if peak > 0:
        band = magnitude > get_settings().numerics.normal_threshold * peak
    else:
        band = np.zeros_like(magnitude, dtype=bool)
    return _MollifiedInterface(chi_delta, grad, magnitude, band)


def perimeter(chi: BinaryPhase | ScalarField, delta: float) -> float:
    """Total variation of the mollified phase."""
    interface = _mollified(chi, delta)
    return float(interface.magnitude.sum()) * interface.chi_delta.grid.cell_area


def mollified_normal(chi: BinaryPhase | ScalarField, delta: float) -> VectorField:
    """Unit normal pointing into {chi = 1}; zero off the interface band."""
    interface = _mollified(chi, delta)
    safe = np.where(interface.band, interface.magnitude, 1.0)
    grid = interface.chi_delta.grid
    return VectorField.from_arrays(
        grid,
        np.where(interface.band, interface.grad.x.values / safe, 0.0),
        np.where(interface.band, interface.grad.y.values / safe, 0.0),
    )


def first_variation(chi: BinaryPhase | ScalarField, eta: VectorField, delta: float) -> float:
    """
    Perimeter first variation ``int (div eta - n . (D eta) n) |grad chi_delta|``.

    Args:
        chi: Phase
        eta: Smooth periodic test field
        delta: Mollifier width

    Returns:
        The directional derivative of the perimeter along eta
    """
    interface = _mollified(chi, delta)
    grid = interface.chi_delta.grid
    ux = interface.grad.x.values
    uy = interface.grad.y.values
    magnitude = interface.magnitude

    ex = gradient(eta.x)
    ey = gradient(eta.y)
    div_eta = ex.x.values + ey.y.values
    # n . (D eta) n |grad u| == grad u . (D eta) grad u / |grad u|
    stretch = ux * ux * ex.x.values + ux * uy * (ex.y.values + ey.x.values) + uy * uy * ey.y.values
    # the normal vanishes off the band
    safe = np.where(interface.band, magnitude, 1.0)
    integrand = div_eta * magnitude - np.where(interface.band, stretch / safe, 0.0)
    return float(integrand.sum()) * grid.cell_area


def _lagrange_test_field(chi: BinaryPhase, delta: float) -> tuple[VectorField, ScalarField]:
    """Gradient field xi with ``div xi = chi_delta - mean(chi_delta)``."""
    ws = workspace_for(chi.grid)
    chi_delta = mollify(chi.as_field(), delta)
    centered = chi_delta - chi_delta.mean()
    psi = -ws.inv_neg_laplacian(centered)
    xi = gradient(psi)
    return xi, divergence(xi)


def lagrange_multiplier(
    chi: BinaryPhase, mu0: ScalarField, delta: float, kappa: float = 1.0
) -> float:
    """
    Constant lambda making ``mu0 + lambda`` satisfy the weak Gibbs-Thomson law.

    Raises:
        DegeneratePhaseError: if ``int chi div xi`` is below the configured floor
    """
    xi, div_xi = _lagrange_test_field(chi, delta)
    chi_field = chi.as_field()
    denominator = chi_field.inner(div_xi)
    floor = get_settings().numerics.lambda_floor
    if abs(denominator) < floor:
        raise DegeneratePhaseError("lagrange multiplier test field has vanishing flux", denominator)
    numerator = kappa * first_variation(chi, xi, delta) - chi_field.inner(
        divergence(vector_product(mu0, xi))
    )
    return numerator / denominator


def lagrange_bound_ratio(
    chi: BinaryPhase, mu0: ScalarField, lam: float, delta: float, kappa: float = 1.0
) -> float:
    """``|lambda| / ((1 + Per) (kappa Per + ||grad mu0||))``, bounded for non-degenerate phases."""
    per = perimeter(chi, delta)
    scale = (1.0 + per) * (kappa * per + float(np.sqrt(dirichlet_energy(mu0))))
    return abs(lam) / max(scale, np.finfo(float).tiny)


def gibbs_thomson_residual(
    chi: BinaryPhase,
    mu: ScalarField,
    delta: float,
    test_fields: Sequence[VectorField],
    kappa: float = 1.0,
) -> float:
    """Worst normalized defect of ``kappa dP(eta) = int chi div(mu eta)`` over test fields."""
    chi_field = chi.as_field()
    worst = 0.0
    for eta in test_fields:
        defect = kappa * first_variation(chi, eta, delta) - chi_field.inner(
            divergence(vector_product(mu, eta))
        )
        grads = (gradient(eta.x), gradient(eta.y))
        c1_norm = max(eta.max_abs(), *(g.max_abs() for g in grads))
        worst = max(worst, abs(defect) / (1.0 + c1_norm))
    return worst


def curvature_field(chi: BinaryPhase | ScalarField, delta: float) -> ScalarField:
    """
    Mean curvature ``-div(n)`` of the level sets of chi_delta, zero off the band.

    Positive on the boundary of a convex blob of phase 1.
    """
    interface = _mollified(chi, delta)
    grid = interface.chi_delta.grid
    gx = interface.grad.x
    gy = interface.grad.y
    gxx = gradient(gx)
    gyy = gradient(gy)
    uxx = gxx.x.values
    uyy = gyy.y.values
    uxy = 0.5 * (gxx.y.values + gyy.x.values)
    ux = gx.values
    uy = gy.values
    safe = np.where(interface.band, interface.magnitude, 1.0)
    div_normal = (uxx * uy * uy - 2.0 * ux * uy * uxy + uyy * ux * ux) / safe**3
    return ScalarField(grid, np.where(interface.band, -div_normal, 0.0))


def geometry_report(chi: BinaryPhase, delta: float) -> GeometryReport:
    interface = _mollified(chi, delta)
    curvature = curvature_field(chi, delta).values
    weights = np.where(interface.band, interface.magnitude, 0.0)
    total = float(weights.sum())
    mean_curvature = float((curvature * weights).sum() / total) if total > 0 else 0.0
    return GeometryReport(
        perimeter=float(interface.magnitude.sum()) * chi.grid.cell_area,
        mass=chi.mass,
        area=chi.area,
        interface_cells=int(np.count_nonzero(interface.band)),
        mean_curvature=mean_curvature,
    )


def default_test_fields(grid: Grid) -> list[VectorField]:
    """Smooth periodic vector fields probing the weak Gibbs-Thomson law."""
    k = 2.0 * np.pi / grid.length
    fields = [
        (lambda x, y: np.sin(k * y), lambda x, y: np.zeros_like(x)),
        (lambda x, y: np.zeros_like(x), lambda x, y: np.sin(k * x)),
        (lambda x, y: np.cos(k * x) * np.sin(k * y), lambda x, y: np.sin(k * x) * np.cos(k * y)),
        (lambda x, y: np.cos(2 * k * y), lambda x, y: np.cos(2 * k * x)),
    ]
    return [
        VectorField(ScalarField.from_function(grid, fx), ScalarField.from_function(grid, fy))
        for fx, fy in fields
    ]
