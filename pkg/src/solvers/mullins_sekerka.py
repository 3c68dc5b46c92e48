"""
Minimizing-movement step for Mullins-Sekerka flow with transport.

One step minimizes

    F^h(sigma) = kappa * Per_delta(sigma)
                 + 1 / (2 h m) * || sigma - chi_prev + h * v_prev . grad chi_prev ||_{H^-1}^2

over binary phases with the mass of ``chi_prev``, then recovers the chemical
potential from the Euler-Lagrange equation. The minimization is a
mass-preserving swap annealer; the H^{-1} term is updated in O(n^2) per
accepted swap through the Green function of the periodic Laplacian.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.config import get_settings
from src.core.grid import (
    ScalarField,
    VectorField,
    dirichlet_energy,
    divergence,
    gradient,
    mollifier_kernel,
    mollify,
    vector_product,
)
from src.core.hneg import workspace_for
from src.exceptions import BookkeepingError, LedgerViolationError, MassMismatchError
from src.interface.geometry import BinaryPhase, lagrange_multiplier, perimeter
from src.metrics.solver_metrics import solver_metrics
from src.utils.logging_decorators import log_timed

logger = logging.getLogger(__name__)


class AnnealConfig(BaseModel):
    """Swap annealer schedule."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sweeps: int = Field(4, ge=1, description="Maximum sweeps")
    temp_init: float = Field(0.05, ge=0, description="Initial temperature in units of kappa*dx")
    temp_decay: float = Field(0.5, gt=0, le=1, description="Geometric cooling factor per sweep")
    seed: int = Field(0, ge=0, description="Base seed, combined with the step index")
    no_improve_window: int = Field(2, ge=1, description="Stop after this many sweeps without improvement")


class MsStepConfig(BaseModel):
    """Parameters of one minimizing-movement step."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    h: float = Field(..., gt=0, description="Time step")
    delta: float = Field(..., gt=0, description="Mollifier width")
    anneal: AnnealConfig = Field(default_factory=AnnealConfig)


@dataclass
class MsStepResult:
    """Outcome of one minimizing-movement step."""

    chi_new: BinaryPhase
    mu0: ScalarField
    lam: float
    perimeter: float
    fh_initial: float
    fh_final: float
    grad_mu_sq: float
    transport_hneg: float
    velocity_sq_prev: float
    anneal_accepted: int = 0
    anneal_proposals: int = 0
    trace: list[tuple[int, float, bool]] = field(default_factory=list)

    @property
    def mu(self) -> ScalarField:
        return self.mu0 + self.lam


def transport_term(chi: BinaryPhase, v: VectorField) -> ScalarField:
    """
    Weak transport ``v . grad chi`` realized as ``div(chi v)``.

    Its pairing with a smooth test function zeta is ``-int chi v . grad zeta``.
    """
    return divergence(vector_product(chi.as_field(), v))


def _check_mass(expected: BinaryPhase, actual: BinaryPhase) -> None:
    if expected.mass != actual.mass:
        raise MassMismatchError(expected.mass, actual.mass)


def fh_energy(
    sigma: BinaryPhase,
    chi_prev: BinaryPhase,
    v_prev: VectorField,
    h: float,
    delta: float,
    kappa: float = 1.0,
    mobility: float = 1.0,
) -> float:
    """Evaluate the minimizing-movement functional from scratch."""
    _check_mass(chi_prev, sigma)
    residual = sigma.as_field() - chi_prev.as_field() + transport_term(chi_prev, v_prev) * h
    hneg = workspace_for(sigma.grid).hneg_norm(residual)
    return kappa * perimeter(sigma, delta) + hneg * hneg / (2.0 * h * mobility)


def chemical_potential(
    chi_new: BinaryPhase,
    chi_prev: BinaryPhase,
    v_prev: VectorField,
    h: float,
    mobility: float = 1.0,
) -> ScalarField:
    """Mean-zero mu0 with ``-m Delta mu0 = (chi_new - chi_prev) / h + v_prev . grad chi_prev``."""
    _check_mass(chi_prev, chi_new)
    rate = (chi_new.as_field() - chi_prev.as_field()) / h + transport_term(chi_prev, v_prev)
    return -workspace_for(chi_new.grid).inv_neg_laplacian(rate) / mobility


class _FhAnnealer:
    """
    Mass-preserving swap annealer for F^h.

    State kept per phase ``sigma``: ``g = sigma - a`` with the fixed target
    ``a = chi_prev - h t``, ``u = (-Delta)^{-1} g`` and the gradient of
    ``mollify(sigma)``. A proposal moves one boundary cell from phase 1 to a
    boundary cell of phase 0.
    """

    def __init__(
        self,
        chi_prev: BinaryPhase,
        v_prev: VectorField,
        cfg: MsStepConfig,
        kappa: float,
        mobility: float,
    ) -> None:
        self.chi_prev = chi_prev
        self.v_prev = v_prev
        self.cfg = cfg
        self.kappa = kappa
        self.mobility = mobility
        self.grid = chi_prev.grid
        self.n = self.grid.n
        self.area = self.grid.cell_area

        ws = workspace_for(self.grid)
        self._inverse_symbol = ws.inverse_symbol
        self._green = ws.green_function
        self._green_origin = float(self._green[0, 0])
        self._penalty = 1.0 / (2.0 * cfg.h * mobility)

        target = chi_prev.as_field() - transport_term(chi_prev, v_prev) * cfg.h
        self._target = np.array(target.values)

        kernel_grad = gradient(mollifier_kernel(self.grid, cfg.delta))
        self._kx = np.array(kernel_grad.x.values)
        self._ky = np.array(kernel_grad.y.values)

        settings = get_settings().numerics
        radius = math.ceil(settings.mollifier_window * cfg.delta / self.grid.dx)
        self._radius = min(radius, (self.n - 1) // 2)
        offsets = np.arange(-self._radius, self._radius + 1)
        dr, dc = np.meshgrid(offsets, offsets, indexing="ij")
        self._window_dr = dr.ravel()
        self._window_dc = dc.ravel()
        self._bookkeeping_tol = settings.bookkeeping_tolerance

        self.sigma = chi_prev.chi.astype(np.float64)
        self._resync()

    def _resync(self) -> None:
        """Rebuild every cached quantity from ``sigma``."""
        self._g = self.sigma - self._target
        self._u = self.grid.inverse(self._inverse_symbol * self.grid.forward(self._g))
        grad = gradient(mollify(ScalarField(self.grid, self.sigma), self.cfg.delta))
        self._gx = np.array(grad.x.values)
        self._gy = np.array(grad.y.values)
        self._refresh_energy()

    def _refresh_energy(self) -> None:
        self.perimeter = float(np.hypot(self._gx, self._gy).sum()) * self.area
        self.hneg_sq = float(np.sum(self._g * self._u)) * self.area
        self.energy = self.kappa * self.perimeter + self._penalty * self.hneg_sq

    def boundary_cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat indices of phase-1 cells touching phase 0 and vice versa (4-neighbourhood)."""
        s = self.sigma
        neighbours = [np.roll(s, shift, axis) for axis in (0, 1) for shift in (1, -1)]
        low = np.minimum.reduce(neighbours)
        high = np.maximum.reduce(neighbours)
        inner = np.flatnonzero((s == 1.0) & (low == 0.0))
        outer = np.flatnonzero((s == 0.0) & (high == 1.0))
        return inner, outer

    def _window(self, cell: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        return (cell[0] + self._window_dr) % self.n, (cell[1] + self._window_dc) % self.n

    def _affected_cells(self, p: tuple[int, int], q: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        rows_p, cols_p = self._window(p)
        rows_q, cols_q = self._window(q)
        rows = np.concatenate([rows_p, rows_q])
        cols = np.concatenate([cols_p, cols_q])
        dr = abs(p[0] - q[0])
        dc = abs(p[1] - q[1])
        reach = 2 * self._radius
        if min(dr, self.n - dr) <= reach and min(dc, self.n - dc) <= reach:
            flat = np.unique(rows * self.n + cols)
            rows, cols = np.divmod(flat, self.n)
        return rows, cols

    def proposal_delta(self, p: tuple[int, int], q: tuple[int, int]) -> float:
        """Change of F^h when cell p leaves phase 1 and cell q joins it."""
        rows, cols = self._affected_cells(p, q)
        from_p = ((rows - p[0]) % self.n, (cols - p[1]) % self.n)
        from_q = ((rows - q[0]) % self.n, (cols - q[1]) % self.n)
        gx = self._gx[rows, cols]
        gy = self._gy[rows, cols]
        gx_new = gx - self._kx[from_p] + self._kx[from_q]
        gy_new = gy - self._ky[from_p] + self._ky[from_q]
        d_perimeter = float(np.sum(np.hypot(gx_new, gy_new) - np.hypot(gx, gy))) * self.area

        offset = ((q[0] - p[0]) % self.n, (q[1] - p[1]) % self.n)
        d_hneg = self.area * (
            2.0 * (self._u[q] - self._u[p]) + 2.0 * self._green_origin - 2.0 * self._green[offset]
        )
        return self.kappa * d_perimeter + self._penalty * d_hneg

    def accept(self, p: tuple[int, int], q: tuple[int, int]) -> None:
        self.sigma[p] = 0.0
        self.sigma[q] = 1.0
        self._g[p] -= 1.0
        self._g[q] += 1.0
        axes = (0, 1)
        self._u += np.roll(self._green, q, axes) - np.roll(self._green, p, axes)
        self._gx += np.roll(self._kx, q, axes) - np.roll(self._kx, p, axes)
        self._gy += np.roll(self._ky, q, axes) - np.roll(self._ky, p, axes)
        self._refresh_energy()

    def check_bookkeeping(self) -> None:
        exact = fh_energy(
            BinaryPhase(self.grid, self.sigma.astype(np.uint8)),
            self.chi_prev,
            self.v_prev,
            self.cfg.h,
            self.cfg.delta,
            self.kappa,
            self.mobility,
        )
        if abs(exact - self.energy) > self._bookkeeping_tol * max(1.0, abs(exact)):
            raise BookkeepingError(self.energy, exact)
        self._resync()

    def run(self, step: int) -> tuple[BinaryPhase, int, int, list[tuple[int, float, bool]]]:
        anneal = self.cfg.anneal
        rng = np.random.default_rng([anneal.seed, step])
        best_energy = self.energy
        best_sigma = self.sigma.copy()
        temperature = anneal.temp_init * self.kappa * self.grid.dx
        proposals = accepted = iteration = ties = 0
        stale_sweeps = sweeps_run = 0
        trace: list[tuple[int, float, bool]] = []

        for sweep in range(anneal.sweeps):
            inner, outer = self.boundary_cells()
            budget = inner.size + outer.size
            improved = False
            for _ in range(budget):
                if inner.size == 0 or outer.size == 0:
                    break
                p = divmod(int(inner[rng.integers(inner.size)]), self.n)
                q = divmod(int(outer[rng.integers(outer.size)]), self.n)
                delta_f = self.proposal_delta(p, q)
                draw = rng.random()
                take = delta_f <= 0.0 or (
                    temperature > 0.0 and draw < math.exp(-delta_f / temperature)
                )
                proposals += 1
                iteration += 1
                if take:
                    self.accept(p, q)
                    accepted += 1
                    inner, outer = self.boundary_cells()
                    if self.energy < best_energy:
                        best_energy = self.energy
                        best_sigma = self.sigma.copy()
                        improved = True
                    elif self.energy == best_energy and not np.array_equal(self.sigma, best_sigma):
                        ties += 1
                trace.append((iteration, self.energy, take))

            self.check_bookkeeping()
            sweeps_run += 1
            logger.debug(
                f"Sweep {sweep}: T={temperature:.3e}, F^h={self.energy:.10g}, best={best_energy:.10g}"
            )
            temperature *= anneal.temp_decay
            stale_sweeps = 0 if improved else stale_sweeps + 1
            if stale_sweeps >= anneal.no_improve_window:
                break

        if ties:
            logger.warning(f"⚠️ {ties} accepted states tied the best F^h; keeping the first one found")
        solver_metrics.record_anneal(proposals, accepted, resyncs=sweeps_run)
        return BinaryPhase(self.grid, best_sigma.astype(np.uint8)), proposals, accepted, trace


def _write_trace(path: Path, trace: list[tuple[int, float, bool]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "fh", "accepted"])
        for iteration, energy, accepted in trace:
            writer.writerow([iteration, format(energy, ".17g"), int(accepted)])


def _anneal(
    chi_prev: BinaryPhase,
    v_prev: VectorField,
    cfg: MsStepConfig,
    kappa: float,
    mobility: float,
    step: int,
) -> tuple[BinaryPhase, float, float, int, int, list[tuple[int, float, bool]]]:
    fh_initial = fh_energy(chi_prev, chi_prev, v_prev, cfg.h, cfg.delta, kappa, mobility)
    annealer = _FhAnnealer(chi_prev, v_prev, cfg, kappa, mobility)
    candidate, proposals, accepted, trace = annealer.run(step)
    fh_final = fh_energy(candidate, chi_prev, v_prev, cfg.h, cfg.delta, kappa, mobility)
    if fh_final > fh_initial:
        logger.warning(
            f"⚠️ Annealer ended above the starting energy ({fh_final:.10g} > {fh_initial:.10g}); keeping previous phase"
        )
        return chi_prev, fh_initial, fh_initial, proposals, accepted, trace
    return candidate, fh_initial, fh_final, proposals, accepted, trace


def minimize_fh(
    chi_prev: BinaryPhase,
    v_prev: VectorField,
    cfg: MsStepConfig,
    kappa: float = 1.0,
    mobility: float = 1.0,
    step: int = 0,
    trace_path: Path | None = None,
) -> BinaryPhase:
    """
    Approximate minimizer of F^h among phases with the mass of ``chi_prev``.

    The result never has larger F^h than ``chi_prev``; runs are deterministic
    for a given ``(cfg.anneal.seed, step)``.
    """
    chi_new, _, _, _, _, trace = _anneal(chi_prev, v_prev, cfg, kappa, mobility, step)
    if trace_path is not None:
        _write_trace(trace_path, trace)
    return chi_new


@log_timed()
def mullins_sekerka_step(
    chi_prev: BinaryPhase,
    v_prev: VectorField,
    cfg: MsStepConfig,
    kappa: float = 1.0,
    mobility: float = 1.0,
    step: int = 0,
    trace_path: Path | None = None,
) -> MsStepResult:
    """
    Advance the phase by one minimizing-movement step.

    Raises:
        LedgerViolationError: if the transport bound or the discrete Mullins-Sekerka
            energy law fails
        DegeneratePhaseError: if the new phase admits no Lagrange multiplier
    """
    chi_new, fh_initial, fh_final, proposals, accepted, trace = _anneal(
        chi_prev, v_prev, cfg, kappa, mobility, step
    )
    if trace_path is not None:
        _write_trace(trace_path, trace)

    mu0 = chemical_potential(chi_new, chi_prev, v_prev, cfg.h, mobility)
    lam = lagrange_multiplier(chi_new, mu0, cfg.delta, kappa)
    grad_mu_sq = dirichlet_energy(mu0)
    new_perimeter = perimeter(chi_new, cfg.delta)
    old_perimeter = perimeter(chi_prev, cfg.delta)
    transport_hneg = workspace_for(chi_prev.grid).hneg_norm(transport_term(chi_prev, v_prev))
    velocity_sq_prev = v_prev.inner(v_prev)

    tolerance = get_settings().numerics.energy_tolerance
    speed = v_prev.l2_norm()
    if transport_hneg > speed + tolerance * (1.0 + speed):
        raise LedgerViolationError("transport bound", transport_hneg, speed, step)

    lhs = kappa * new_perimeter + 0.5 * cfg.h * mobility * grad_mu_sq
    rhs = kappa * old_perimeter + 0.5 * cfg.h / mobility * velocity_sq_prev
    if lhs > rhs + tolerance * (1.0 + abs(rhs)):
        raise LedgerViolationError("Mullins-Sekerka energy law", lhs, rhs, step)

    logger.debug(
        f"MS step {step}: F^h {fh_initial:.10g} -> {fh_final:.10g}, "
        f"accepted {accepted}/{proposals}, lambda={lam:.6g}"
    )
    return MsStepResult(
        chi_new=chi_new,
        mu0=mu0,
        lam=lam,
        perimeter=new_perimeter,
        fh_initial=fh_initial,
        fh_final=fh_final,
        grad_mu_sq=grad_mu_sq,
        transport_hneg=transport_hneg,
        velocity_sq_prev=velocity_sq_prev,
        anneal_accepted=accepted,
        anneal_proposals=proposals,
        trace=trace,
    )
