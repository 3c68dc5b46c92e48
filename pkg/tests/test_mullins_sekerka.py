import csv

import numpy as np
import numpy.testing as npt
import pytest
from pydantic import ValidationError

from src.core.grid import Grid, ScalarField, VectorField, dirichlet_energy, dirichlet_inner
from src.core.hneg import hneg_norm
from src.driver.initial_data import shear_mode
from src.exceptions import LedgerViolationError, MassMismatchError
from src.interface.geometry import BinaryPhase, perimeter
from src.solvers import mullins_sekerka as ms_module
from src.solvers.mullins_sekerka import (
    AnnealConfig,
    MsStepConfig,
    _FhAnnealer,
    chemical_potential,
    fh_energy,
    minimize_fh,
    mullins_sekerka_step,
    transport_term,
)

TWO_PI = 2.0 * np.pi


def _swap(phase: BinaryPhase, p: tuple[int, int], q: tuple[int, int]) -> BinaryPhase:
    chi = phase.chi.copy()
    assert chi[p] == 1 and chi[q] == 0
    chi[p], chi[q] = 0, 1
    return BinaryPhase(phase.grid, chi)


def _uniform(grid: Grid, ux: float, uy: float) -> VectorField:
    return VectorField(grid.constant(ux), grid.constant(uy))


def test_transport_of_zero_velocity_vanishes(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    assert transport_term(disk, VectorField.zeros(grid32)).max_abs() == 0.0


def test_transport_of_constant_phase_vanishes(grid32):
    full = BinaryPhase(grid32, np.ones(grid32.shape))
    assert transport_term(full, shear_mode(grid32)).max_abs() < 1e-12


def test_transport_duality(grid64):
    disk = BinaryPhase.disk(grid64, 0.25, center=(0.4, 0.55))
    v = _uniform(grid64, 1.0, 0.5)
    zeta = ScalarField.from_function(grid64, lambda x, y: np.sin(TWO_PI * x) * np.cos(TWO_PI * y))
    t = transport_term(disk, v)
    x, y = grid64.coordinates
    zeta_x = TWO_PI * np.cos(TWO_PI * x) * np.cos(TWO_PI * y)
    zeta_y = -TWO_PI * np.sin(TWO_PI * x) * np.sin(TWO_PI * y)
    expected = -float(np.sum(disk.chi * (1.0 * zeta_x + 0.5 * zeta_y))) * grid64.cell_area
    assert t.inner(zeta) == pytest.approx(expected, abs=1e-8)
    assert abs(t.mean()) < 1e-10


def test_stripe_transport_by_uniform_flow_along_it(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.5)
    assert transport_term(stripe, _uniform(grid64, 1.0, 0.0)).max_abs() < 1e-10


def test_fh_energy_of_unchanged_phase_is_perimeter(grid64):
    disk = BinaryPhase.disk(grid64, 0.25)
    delta = 2 * grid64.dx
    energy = fh_energy(disk, disk, VectorField.zeros(grid64), 0.01, delta)
    assert energy == perimeter(disk, delta)


def test_fh_energy_of_shifted_stripe(grid64):
    stripe = BinaryPhase.horizontal_stripe(grid64, 0.5)
    shifted = BinaryPhase(grid64, np.roll(stripe.chi, 1, axis=0))
    h = 0.01
    delta = 2 * grid64.dx
    energy = fh_energy(shifted, stripe, VectorField.zeros(grid64), h, delta)

    # dense oracle: full complex FFT of the displacement
    diff = shifted.chi.astype(float) - stripe.chi.astype(float)
    k = TWO_PI * np.fft.fftfreq(64, d=1.0 / 64)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    coefficients = np.fft.fft2(diff)
    mask = k2 > 0
    hneg_sq = float(np.sum(np.abs(coefficients[mask]) ** 2 / k2[mask])) / 64**2 * grid64.cell_area
    assert perimeter(shifted, delta) == pytest.approx(perimeter(stripe, delta), rel=1e-12)
    assert energy - perimeter(shifted, delta) == pytest.approx(hneg_sq / (2 * h), rel=1e-10)
    assert hneg_sq > 0


def test_fh_energy_requires_equal_mass(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    smaller = BinaryPhase.disk(grid32, 0.2)
    with pytest.raises(MassMismatchError):
        fh_energy(smaller, disk, VectorField.zeros(grid32), 0.01, 2 * grid32.dx)


def test_chemical_potential_of_unchanged_phase(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    mu0 = chemical_potential(disk, disk, VectorField.zeros(grid32), 0.01)
    assert mu0.max_abs() == 0.0


def test_chemical_potential_norm_identity(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    moved = _swap(disk, (16, 24), (16, 25))
    v = shear_mode(grid32, 0.7)
    h = 0.01
    mu0 = chemical_potential(moved, disk, v, h)
    rate = (moved.as_field() - disk.as_field()) / h + transport_term(disk, v)
    assert dirichlet_energy(mu0) == pytest.approx(hneg_norm(rate) ** 2, rel=1e-10)
    assert abs(mu0.mean()) < 1e-14


def test_chemical_potential_weak_equation(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    moved = _swap(disk, (16, 24), (16, 25))
    v = shear_mode(grid32, 0.7)
    h = 0.01
    mu0 = chemical_potential(moved, disk, v, h)
    xi = ScalarField.from_function(grid32, lambda x, y: np.cos(TWO_PI * x) * np.sin(2 * TWO_PI * y))
    terms = (
        dirichlet_inner(mu0, xi),
        ((moved.as_field() - disk.as_field()) / h).inner(xi),
        transport_term(disk, v).inner(xi),
    )
    assert abs(sum(terms)) < 1e-8 * max(abs(t) for t in terms)


def test_chemical_potential_of_single_swap_matches_green_function():
    grid = Grid(32)
    disk = BinaryPhase.disk(grid, 0.25)
    p = (16, 24)
    q = (0, 24)
    moved = _swap(disk, p, q)
    h = 0.01
    mu0 = chemical_potential(moved, disk, VectorField.zeros(grid), h)

    k = TWO_PI * np.fft.fftfreq(32, d=1.0 / 32)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    inverse = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    green = np.fft.ifft2(inverse).real
    expected = -(np.roll(green, q, (0, 1)) - np.roll(green, p, (0, 1))) / h
    npt.assert_allclose(mu0.values, expected, atol=1e-10 * np.abs(expected).max())


def test_minimize_keeps_phase_when_time_step_is_tiny(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    cfg = MsStepConfig(h=1e-7, delta=2 * grid32.dx)
    result = minimize_fh(disk, VectorField.zeros(grid32), cfg)
    npt.assert_array_equal(result.chi, disk.chi)


def test_every_swap_from_stripe_raises_energy(grid32):
    stripe = BinaryPhase.horizontal_stripe(grid32, 0.5)
    cfg = MsStepConfig(h=0.01, delta=2 * grid32.dx)
    annealer = _FhAnnealer(stripe, VectorField.zeros(grid32), cfg, kappa=1.0, mobility=1.0)
    inner, outer = annealer.boundary_cells()
    assert inner.size == 64 and outer.size == 64
    for a in inner:
        p = divmod(int(a), 32)
        deltas = [annealer.proposal_delta(p, divmod(int(b), 32)) for b in outer]
        assert min(deltas) > 0


def test_minimize_returns_stripe(grid32):
    stripe = BinaryPhase.horizontal_stripe(grid32, 0.5)
    cfg = MsStepConfig(h=0.01, delta=2 * grid32.dx)
    result = minimize_fh(stripe, VectorField.zeros(grid32), cfg)
    npt.assert_array_equal(result.chi, stripe.chi)


def test_healed_disk_beats_dented_disk(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    row = 16
    right = int(np.flatnonzero(disk.chi[row])[-1])
    dented = _swap(disk, (row, right), (row + 9, 16))
    cfg = MsStepConfig(h=1.0, delta=2 * grid32.dx, anneal=AnnealConfig(sweeps=6, no_improve_window=3))
    zero = VectorField.zeros(grid32)
    healed_energy = fh_energy(disk, dented, zero, cfg.h, cfg.delta)
    assert healed_energy < fh_energy(dented, dented, zero, cfg.h, cfg.delta)

    result = minimize_fh(dented, zero, cfg)
    assert result.mass == dented.mass
    assert fh_energy(result, dented, zero, cfg.h, cfg.delta) <= fh_energy(dented, dented, zero, cfg.h, cfg.delta)
    assert perimeter(result, cfg.delta) <= perimeter(dented, cfg.delta)


def test_incremental_energy_matches_exact_evaluation(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    v = shear_mode(grid32, 0.5)
    cfg = MsStepConfig(h=0.005, delta=2 * grid32.dx)
    annealer = _FhAnnealer(disk, v, cfg, kappa=1.3, mobility=0.7)
    rng = np.random.default_rng(3)
    for _ in range(5):
        inner, outer = annealer.boundary_cells()
        p = divmod(int(inner[rng.integers(inner.size)]), 32)
        q = divmod(int(outer[rng.integers(outer.size)]), 32)
        predicted = annealer.energy + annealer.proposal_delta(p, q)
        annealer.accept(p, q)
        assert annealer.energy == pytest.approx(predicted, rel=1e-7)
    current = BinaryPhase(grid32, annealer.sigma.astype(np.uint8))
    exact = fh_energy(current, disk, v, cfg.h, cfg.delta, kappa=1.3, mobility=0.7)
    assert annealer.energy == pytest.approx(exact, rel=1e-8)
    annealer.check_bookkeeping()


def test_step_conserves_mass_and_satisfies_energy_law(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    v = shear_mode(grid32, 1.0)
    cfg = MsStepConfig(h=1e-3, delta=2 * grid32.dx)
    result = mullins_sekerka_step(disk, v, cfg, step=1)
    assert result.chi_new.mass == disk.mass
    assert result.fh_final <= result.fh_initial
    assert abs(result.mu0.mean()) < 1e-12
    lhs = result.perimeter + 0.5 * cfg.h * result.grad_mu_sq
    rhs = perimeter(disk, cfg.delta) + 0.5 * cfg.h * v.inner(v)
    assert lhs <= rhs + 1e-8 * (1 + abs(rhs))
    assert result.transport_hneg <= v.l2_norm() * (1 + 1e-12)
    assert result.mu.mean() == pytest.approx(result.lam)


def test_step_is_deterministic(grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    v = shear_mode(grid32, 1.0)
    cfg = MsStepConfig(h=1e-3, delta=2 * grid32.dx, anneal=AnnealConfig(seed=11))
    first = mullins_sekerka_step(disk, v, cfg, step=4)
    second = mullins_sekerka_step(disk, v, cfg, step=4)
    npt.assert_array_equal(first.chi_new.chi, second.chi_new.chi)
    assert first.fh_final == second.fh_final
    assert first.trace == second.trace


def test_annealing_trace_is_written(tmp_path, grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    cfg = MsStepConfig(h=1e-2, delta=2 * grid32.dx, anneal=AnnealConfig(sweeps=1))
    path = tmp_path / "trace.csv"
    result = mullins_sekerka_step(disk, shear_mode(grid32), cfg, trace_path=path)
    with path.open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["iteration", "fh", "accepted"]
    assert len(rows) - 1 == result.anneal_proposals


def test_step_rejects_transport_exceeding_velocity(monkeypatch, grid32):
    disk = BinaryPhase.disk(grid32, 0.25)
    cfg = MsStepConfig(h=1e-3, delta=2 * grid32.dx)
    wave = ScalarField.from_function(grid32, lambda x, y: np.cos(TWO_PI * x) + 0.0 * y)
    monkeypatch.setattr(ms_module, "transport_term", lambda chi, v: wave)
    with pytest.raises(LedgerViolationError) as excinfo:
        mullins_sekerka_step(disk, VectorField.zeros(grid32), cfg, step=3)
    assert excinfo.value.inequality == "transport bound"
    assert excinfo.value.lhs == pytest.approx(hneg_norm(wave))
    assert excinfo.value.rhs == 0.0
    assert excinfo.value.row == 3


def test_anneal_requires_at_least_one_sweep():
    with pytest.raises(ValidationError):
        AnnealConfig(sweeps=0)
