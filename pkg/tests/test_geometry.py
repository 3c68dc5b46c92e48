import numpy as np
import numpy.testing as npt
import pytest
from scipy import integrate

from src.core.grid import Grid, ScalarField, VectorField, gradient, mollify
from src.exceptions import ConfigurationError, DegeneratePhaseError
from src.interface.geometry import (
    BinaryPhase,
    curvature_field,
    default_test_fields,
    first_variation,
    geometry_report,
    gibbs_thomson_residual,
    lagrange_bound_ratio,
    lagrange_multiplier,
    mollified_normal,
    perimeter,
)

TWO_PI = 2.0 * np.pi


def test_phase_validation(grid32):
    with pytest.raises(ConfigurationError):
        BinaryPhase(grid32, np.full(grid32.shape, 2))
    with pytest.raises(ConfigurationError):
        BinaryPhase(grid32, np.zeros((8, 8)))


def test_stripe_and_disk_builders(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.5)
    assert stripe.mass == 64 * 32
    assert stripe.area == pytest.approx(0.5)
    disk = BinaryPhase.disk(grid64, 0.25)
    assert disk.area == pytest.approx(np.pi / 16, rel=0.03)


def test_empty_phase_has_zero_perimeter(grid32):
    assert perimeter(BinaryPhase(grid32, np.zeros(grid32.shape)), 2 * grid32.dx) == 0.0


def test_stripe_perimeter(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.3)
    assert perimeter(stripe, 2 * grid64.dx) == pytest.approx(2.0, rel=0.03)


def test_disk_perimeter(grid64):
    disk = BinaryPhase.disk(grid64, 0.25)
    assert perimeter(disk, 2 * grid64.dx) == pytest.approx(2 * np.pi * 0.25, rel=0.05)


def test_perimeter_is_shift_invariant(grid64):
    disk = BinaryPhase.disk(grid64, 0.2, center=(0.4, 0.55))
    shifted = BinaryPhase(grid64, np.roll(disk.chi, (5, -9), axis=(0, 1)))
    delta = 2 * grid64.dx
    # FFT round-off only
    assert perimeter(shifted, delta) == pytest.approx(perimeter(disk, delta), rel=1e-12)


def test_normal_is_unit_on_band(grid64):
    disk = BinaryPhase.disk(grid64, 0.25)
    normal = mollified_normal(disk, 2 * grid64.dx)
    length = normal.magnitude().values
    on_band = length > 0
    assert on_band.any()
    npt.assert_allclose(length[on_band], 1.0, atol=1e-6)
    # points into the phase: at the rightmost interface the normal points to -x
    row = grid64.n // 2
    col = int(np.flatnonzero(disk.chi[row])[-1])
    assert normal.x.values[row, col] < -0.9


def test_first_variation_vanishes_for_constant_field(grid64):
    disk = BinaryPhase.disk(grid64, 0.25)
    eta = VectorField(grid64.constant(0.3), grid64.constant(-1.2))
    delta = 2 * grid64.dx
    assert abs(first_variation(disk, eta, delta)) < 1e-6 * perimeter(disk, delta)


@pytest.mark.parametrize("fill", [0, 1])
def test_first_variation_of_trivial_phase(grid32, fill):
    phase = BinaryPhase(grid32, np.full(grid32.shape, fill))
    eta = default_test_fields(grid32)[2]
    assert first_variation(phase, eta, 2 * grid32.dx) == pytest.approx(0.0, abs=1e-12)


def test_first_variation_matches_band_normal(grid64):
    disk = BinaryPhase.disk(grid64, 0.25, center=(0.4, 0.55))
    delta = 2 * grid64.dx
    eta = default_test_fields(grid64)[2]
    normal = mollified_normal(disk, delta)
    grad_u = gradient(mollify(disk.as_field(), delta))
    weight = np.hypot(grad_u.x.values, grad_u.y.values)
    ex, ey = gradient(eta.x), gradient(eta.y)
    nx, ny = normal.x.values, normal.y.values
    stretch = nx * nx * ex.x.values + nx * ny * (ex.y.values + ey.x.values) + ny * ny * ey.y.values
    expected = float(np.sum((ex.x.values + ey.y.values - stretch) * weight)) * grid64.cell_area
    assert first_variation(disk, eta, delta) == pytest.approx(expected, rel=1e-12, abs=1e-14)


def test_first_variation_is_linear(grid64):
    disk = BinaryPhase.disk(grid64, 0.25)
    eta1, eta2 = default_test_fields(grid64)[2:4]
    delta = 2 * grid64.dx
    combined = VectorField(eta1.x * 2.0 + eta2.x * -0.5, eta1.y * 2.0 + eta2.y * -0.5)
    expected = 2.0 * first_variation(disk, eta1, delta) - 0.5 * first_variation(disk, eta2, delta)
    assert first_variation(disk, combined, delta) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_first_variation_of_disk_along_radial_field(grid64):
    r = 0.25
    disk = BinaryPhase.disk(grid64, r)
    eta = VectorField(
        ScalarField.from_function(grid64, lambda x, y: np.sin(TWO_PI * (x - 0.5)) / TWO_PI),
        ScalarField.from_function(grid64, lambda x, y: np.sin(TWO_PI * (y - 0.5)) / TWO_PI),
    )

    # div eta - n . D eta n on the circle of radius r
    def integrand(theta: float) -> float:
        a = np.cos(TWO_PI * r * np.cos(theta))
        b = np.cos(TWO_PI * r * np.sin(theta))
        return (np.sin(theta) ** 2 * a + np.cos(theta) ** 2 * b) * r

    exact, _ = integrate.quad(integrand, 0.0, TWO_PI)
    assert first_variation(disk, eta, 2 * grid64.dx) == pytest.approx(exact, rel=0.07)


def test_lagrange_multiplier_of_flat_stripe(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.5)
    lam = lagrange_multiplier(stripe, grid64.zeros(), 2 * grid64.dx)
    assert abs(lam) < 0.05


def test_lagrange_denominator_is_positive_for_stripe(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.5)
    smoothed = mollify(stripe.as_field(), 2 * grid64.dx)
    assert stripe.as_field().inner(smoothed - smoothed.mean()) > 0


def test_lagrange_multiplier_of_full_phase_is_degenerate(grid32):
    full = BinaryPhase(grid32, np.ones(grid32.shape))
    with pytest.raises(DegeneratePhaseError):
        lagrange_multiplier(full, grid32.zeros(), 2 * grid32.dx)


def test_lagrange_multiplier_of_disk_recovers_curvature():
    grid = Grid(128)
    disk = BinaryPhase.disk(grid, 0.25)
    lam = lagrange_multiplier(disk, grid.zeros(), 2 * grid.dx)
    assert lam == pytest.approx(4.0, rel=0.1)
    assert lagrange_bound_ratio(disk, grid.zeros(), lam, 2 * grid.dx) < 2.0


def test_gibbs_thomson_residual_of_flat_stripe(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.5)
    residual = gibbs_thomson_residual(stripe, grid64.zeros(), 2 * grid64.dx, default_test_fields(grid64))
    assert residual < 1e-6


def test_gibbs_thomson_residual_of_circle():
    grid = Grid(128)
    r = 0.25
    # off-centre so that the test fields carry a net flux through the circle
    disk = BinaryPhase.disk(grid, r, center=(0.35, 0.4))
    mu = grid.constant(1.0 / r)
    residual = gibbs_thomson_residual(disk, mu, 2 * grid.dx, default_test_fields(grid))
    assert residual < 0.1
    wrong = gibbs_thomson_residual(disk, grid.constant(-1.0 / r), 2 * grid.dx, default_test_fields(grid))
    assert wrong > residual


def test_gibbs_thomson_residual_without_test_fields(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    assert gibbs_thomson_residual(disk, grid32.zeros(), 2 * grid32.dx, []) == 0.0


def test_curvature_of_flat_stripe(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.5)
    assert curvature_field(stripe, 2 * grid64.dx).max_abs() < 0.05


@pytest.mark.parametrize(("n", "radius"), [(128, 0.25), (256, 0.125)])
def test_curvature_of_disk(n, radius):
    grid = Grid(n)
    disk = BinaryPhase.disk(grid, radius)
    delta = 2 * grid.dx
    curvature = curvature_field(disk, delta).values
    magnitude = mollified_normal(disk, delta).magnitude().values
    smoothed = mollify(disk.as_field(), delta)
    core = (magnitude > 0) & (np.abs(smoothed.values - 0.5) < 0.25)
    assert np.median(curvature[core]) == pytest.approx(1.0 / radius, rel=0.15)
    report = geometry_report(disk, delta)
    assert report.mean_curvature == pytest.approx(1.0 / radius, rel=0.15)
    assert report.mass == disk.mass
