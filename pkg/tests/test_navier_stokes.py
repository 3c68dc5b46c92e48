import numpy as np
import numpy.testing as npt
import pytest

from src.core.grid import Grid, ScalarField, VectorField, divergence
from src.core.hneg import leray_project
from src.driver.initial_data import shear_mode
from src.exceptions import ConfigurationError, NoConvergenceError
from src.interface.geometry import BinaryPhase
from src.metrics.solver_metrics import solver_metrics
from src.solvers.navier_stokes import (
    NsStepConfig,
    capillary_forcing,
    convection,
    ns_energy_check,
    ns_energy_sides,
    ns_step,
    viscosity_field,
    viscous_dissipation,
    viscous_operator,
)

TWO_PI = 2.0 * np.pi


def test_viscosity_field_bounds(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.5)
    nu = viscosity_field(stripe, 1.0, 10.0, 2 * grid64.dx)
    assert nu.values.min() >= 1.0 - 1e-12
    assert nu.values.max() <= 10.0 + 1e-12
    column = nu.values[:, 0]
    # monotone across the lower interface
    lower = column[: grid64.n // 2]
    assert (np.diff(lower) >= -1e-12).all()


def test_viscosity_field_constant_cases(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    npt.assert_allclose(viscosity_field(disk, 1.0, 1.0, 0.1).values, 1.0, atol=1e-12)
    full = BinaryPhase(grid32, np.ones(grid32.shape))
    npt.assert_allclose(viscosity_field(full, 2.0, 5.0, 0.1).values, 5.0, atol=1e-12)
    with pytest.raises(ConfigurationError):
        viscosity_field(disk, -1.0, 1.0)


def test_viscous_operator_reduces_to_laplacian_for_constant_viscosity(grid32):
    v = shear_mode(grid32, 1.0)
    result = viscous_operator(v, grid32.constant(0.5))
    npt.assert_allclose(result.x.values, 0.5 * TWO_PI**2 * v.x.values, atol=1e-10)
    npt.assert_allclose(result.y.values, 0.0, atol=1e-10)


def test_viscous_operator_pairs_with_dissipation(grid32, rng):
    v = leray_project(VectorField.from_arrays(grid32, rng.standard_normal(grid32.shape), rng.standard_normal(grid32.shape)))
    nu = ScalarField(grid32, 1.0 + rng.random(grid32.shape))
    assert viscous_operator(v, nu).inner(v) == pytest.approx(2.0 * viscous_dissipation(v, nu), rel=1e-10)


def test_convection_does_no_work(grid32, rng):
    a = leray_project(VectorField.from_arrays(grid32, rng.standard_normal(grid32.shape), rng.standard_normal(grid32.shape)))
    v = VectorField.from_arrays(grid32, rng.standard_normal(grid32.shape), rng.standard_normal(grid32.shape))
    assert abs(convection(a, v).inner(v)) < 1e-10 * a.l2_norm() * v.l2_norm()


def test_shear_does_not_convect_itself(grid32):
    v = shear_mode(grid32, 1.0)
    assert convection(v, v).max_abs() < 1e-12


def test_quiescent_state_stays_at_rest(grid32):
    full = BinaryPhase(grid32, np.ones(grid32.shape))
    result = ns_step(VectorField.zeros(grid32), full, grid32.constant(2.0), grid32.constant(1.0), NsStepConfig(h=0.01))
    assert result.v_new.max_abs() < 1e-14
    assert result.converged


def test_single_mode_forced_solve(grid32):
    h, nu0 = 0.01, 1.0
    force = shear_mode(grid32, 1.0)
    disk = BinaryPhase.disk(grid32, 0.25)
    result = ns_step(
        VectorField.zeros(grid32), disk, grid32.zeros(), grid32.constant(nu0), NsStepConfig(h=h), body_force=force
    )
    expected = force.x.values / (1.0 / h + nu0 * TWO_PI**2)
    npt.assert_allclose(result.v_new.x.values, expected, atol=1e-9)
    npt.assert_allclose(result.v_new.y.values, 0.0, atol=1e-9)


def test_shear_mode_decay(grid32):
    h, nu0 = 0.01, 0.5
    v = shear_mode(grid32, 1.0)
    disk = BinaryPhase.disk(grid32, 0.25)
    cfg = NsStepConfig(h=h)
    nu = grid32.constant(nu0)
    factor = 1.0 / (1.0 + h * nu0 * TWO_PI**2)
    for step in range(1, 4):
        v = ns_step(v, disk, grid32.zeros(), nu, cfg, body_force=VectorField.zeros(grid32)).v_new
        npt.assert_allclose(v.x.values, factor**step * shear_mode(grid32, 1.0).x.values, atol=1e-9)


def test_capillary_step_is_divergence_free_and_energy_stable(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    mu = ScalarField.from_function(grid32, lambda x, y: np.cos(TWO_PI * x) + 0.5 * np.sin(2 * TWO_PI * y))
    v_prev = shear_mode(grid32, 0.8)
    nu = viscosity_field(disk, 1.0, 3.0, 2 * grid32.dx)
    cfg = NsStepConfig(h=0.005)
    result = ns_step(v_prev, disk, mu, nu, cfg)
    assert divergence(result.v_new).max_abs() < 1e-9 * max(1.0, result.v_new.l2_norm())
    assert result.converged
    assert result.kinetic == pytest.approx(0.5 * result.v_new.inner(result.v_new))
    assert ns_energy_check(result, v_prev, disk, mu, nu, cfg.h)
    assert solver_metrics.get_snapshot().picard_iterations == result.picard_iterations


def test_energy_check_rejects_inflated_velocity(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    v_prev = shear_mode(grid32, 1.0)
    nu = grid32.constant(1.0)
    zero = VectorField.zeros(grid32)
    cfg = NsStepConfig(h=0.01)
    result = ns_step(v_prev, disk, grid32.zeros(), nu, cfg, body_force=zero)
    assert ns_energy_check(result.v_new, v_prev, disk, grid32.zeros(), nu, cfg.h, body_force=zero)
    inflated = result.v_new * 2.0
    assert not ns_energy_check(inflated, v_prev, disk, grid32.zeros(), nu, cfg.h, body_force=zero)
    lhs, rhs = ns_energy_sides(inflated, v_prev, disk, grid32.zeros(), nu, cfg.h, body_force=zero)
    assert lhs > rhs


def test_capillary_forcing_of_constant_potential_vanishes(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    assert capillary_forcing(disk, grid32.constant(3.0)).max_abs() < 1e-12


def test_picard_failure_raises(grid32):
    v_prev = shear_mode(grid32, 50.0) + VectorField(
        grid32.zeros(), ScalarField.from_function(grid32, lambda x, y: 50.0 * np.sin(TWO_PI * x))
    )
    disk = BinaryPhase.disk(grid32, 0.25)
    cfg = NsStepConfig(h=0.5, picard_max=1, picard_tol=1e-14)
    with pytest.raises(NoConvergenceError):
        ns_step(v_prev, disk, grid32.zeros(), grid32.constant(1e-3), cfg)


def test_viscosity_field_of_diffuse_order_parameter(grid32):
    c = ScalarField.from_function(grid32, lambda x, y: 0.5 + 0.7 * np.sin(TWO_PI * x) * np.cos(TWO_PI * y))
    nu = viscosity_field(c, 1.0, 3.0)
    npt.assert_allclose(nu.values, 1.0 + 2.0 * np.clip(c.values, 0.0, 1.0), rtol=1e-14)


def _smooth_velocity(grid: Grid, rng: np.random.Generator) -> VectorField:
    a = rng.uniform(-1.0, 1.0, size=4)
    x, y = grid.coordinates
    return leray_project(
        VectorField.from_arrays(
            grid,
            a[0] * np.sin(TWO_PI * y) + a[1] * np.cos(TWO_PI * (x + y)),
            a[2] * np.cos(TWO_PI * x) + a[3] * np.sin(TWO_PI * (x - y)),
        )
    )


@pytest.mark.slow
def test_energy_law_holds_on_randomized_steps(rng):
    grid = Grid(16)
    for _ in range(50):
        chi = BinaryPhase.disk(grid, rng.uniform(0.15, 0.35), center=tuple(rng.uniform(0.3, 0.7, size=2)))
        b = rng.uniform(-2.0, 2.0, size=2)
        mu = ScalarField.from_function(grid, lambda x, y, b=b: b[0] * np.cos(TWO_PI * x) + b[1] * np.sin(TWO_PI * y))
        nu = viscosity_field(chi, rng.uniform(0.5, 1.5), rng.uniform(0.5, 3.0), 2 * grid.dx)
        v_prev = _smooth_velocity(grid, rng)
        h = rng.uniform(1e-3, 1e-2)
        result = ns_step(v_prev, chi, mu, nu, NsStepConfig(h=h))
        assert result.converged
        assert ns_energy_check(result, v_prev, chi, mu, nu, h)
