"""
Coupled Navier-Stokes / Mullins-Sekerka time loop.

Each step first moves the interface (minimizing movement driven by the
previous velocity), then advances the velocity under the capillary force of
the new interface. Per-step energy laws are asserted as the run proceeds and
the summed ledger inequality is checked at the end.
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.config import get_settings
from src.core.field_io import write_field, write_pgm
from src.core.grid import Grid, ScalarField, VectorField, dirichlet_energy
from src.driver.initial_data import build_grid, build_initial_phase, build_initial_velocity
from src.driver.ledger import (
    EnergyLedger,
    LedgerRow,
    energy_ledger_check,
    per_step_dissipation,
    write_ledger,
)
from src.exceptions import LedgerViolationError, MassMismatchError, NsmsError, StepFailedError
from src.interface.geometry import (
    BinaryPhase,
    default_test_fields,
    gibbs_thomson_residual,
    lagrange_bound_ratio,
    perimeter,
)
from src.metrics.solver_metrics import solver_metrics
from src.models.run_config import RunConfig, dump_run_config
from src.solvers.mullins_sekerka import AnnealConfig, MsStepConfig, mullins_sekerka_step
from src.solvers.navier_stokes import (
    NsStepConfig,
    ns_energy_check,
    ns_energy_sides,
    ns_step,
    viscosity_field,
)

logger = logging.getLogger(__name__)


@dataclass
class CoupledState:
    """Phase and velocity after a completed step."""

    step: int
    t: float
    chi: BinaryPhase
    v: VectorField
    mu: ScalarField


def ms_config(config: RunConfig) -> MsStepConfig:
    scheme = config.scheme
    return MsStepConfig(
        h=scheme.h,
        delta=config.delta,
        anneal=AnnealConfig(
            sweeps=scheme.anneal_sweeps,
            temp_init=scheme.anneal_temp_init,
            temp_decay=scheme.anneal_temp_decay,
            seed=scheme.anneal_seed if config.initial.seed is None else config.initial.seed,
            no_improve_window=scheme.anneal_no_improve_window,
        ),
    )


def ns_config(config: RunConfig) -> NsStepConfig:
    scheme = config.scheme
    return NsStepConfig(
        h=scheme.h, picard_tol=scheme.picard_tol, picard_max=scheme.picard_max, cg_tol=scheme.cg_tol
    )


class CoupledRunner:
    """Runs one trajectory of the coupled scheme and records its ledger."""

    def __init__(self, config: RunConfig, write_outputs: bool = True) -> None:
        self.config = config
        self.write_outputs = write_outputs
        self.grid: Grid = build_grid(config)
        self.ms_cfg = ms_config(config)
        self.ns_cfg = ns_config(config)
        self.kappa = config.physics.kappa
        self.mobility = config.physics.m
        self.test_fields = default_test_fields(self.grid)
        self.tolerance = get_settings().numerics.energy_tolerance
        self.ledger = EnergyLedger()
        self.state: CoupledState | None = None

    def initial_state(self) -> CoupledState:
        chi = build_initial_phase(self.config, self.grid)
        v = build_initial_velocity(self.config, self.grid)
        return CoupledState(step=0, t=0.0, chi=chi, v=v, mu=self.grid.zeros())

    def _initial_row(self, state: CoupledState) -> LedgerRow:
        return LedgerRow(
            step=0,
            t=0.0,
            kinetic=0.5 * state.v.inner(state.v),
            perimeter=perimeter(state.chi, self.config.delta),
        )

    def advance(self, state: CoupledState) -> tuple[CoupledState, LedgerRow]:
        """One step: interface first, using the previous velocity, then momentum."""
        step = state.step + 1
        h = self.config.scheme.h
        delta = self.config.delta

        ms = mullins_sekerka_step(
            state.chi, state.v, self.ms_cfg, self.kappa, self.mobility, step=step
        )
        if ms.chi_new.mass != state.chi.mass:
            raise MassMismatchError(state.chi.mass, ms.chi_new.mass)
        mu = ms.mu

        nu = viscosity_field(
            ms.chi_new, self.config.physics.nu_minus, self.config.physics.nu_plus, delta
        )
        ns = ns_step(state.v, ms.chi_new, mu, nu, self.ns_cfg)
        if not ns_energy_check(ns.v_new, state.v, ms.chi_new, mu, nu, h):
            lhs, rhs = ns_energy_sides(ns.v_new, state.v, ms.chi_new, mu, nu, h)
            raise LedgerViolationError("momentum energy inequality", lhs, rhs, step)

        row = LedgerRow(
            step=step,
            t=step * h,
            kinetic=ns.kinetic,
            perimeter=ms.perimeter,
            grad_mu_sq=ms.grad_mu_sq,
            viscous=ns.viscous_dissipation,
            fh_initial=ms.fh_initial,
            fh_final=ms.fh_final,
            lambda_=ms.lam,
            gibbs_thomson_residual=gibbs_thomson_residual(
                ms.chi_new, mu, delta, self.test_fields, self.kappa
            ),
            mu_h1=float(np.sqrt(mu.inner(mu) + dirichlet_energy(mu))),
            lambda_bound_ratio=lagrange_bound_ratio(ms.chi_new, ms.mu0, ms.lam, delta, self.kappa),
            picard_iterations=ns.picard_iterations,
        )
        return CoupledState(step=step, t=row.t, chi=ms.chi_new, v=ns.v_new, mu=mu), row

    def _check_step(self, previous: LedgerRow, current: LedgerRow) -> None:
        lhs, rhs = per_step_dissipation(
            previous, current, self.config.scheme.h, self.kappa, self.mobility
        )
        if lhs > rhs + self.tolerance * (1.0 + abs(rhs)):
            raise LedgerViolationError("per-step energy dissipation", lhs, rhs, current.step)

    def _dump(self, state: CoupledState) -> None:
        output = self.config.output
        if not self.write_outputs or output.dump_every == 0 or state.step % output.dump_every:
            return
        stem = output.directory / f"step_{state.step:06d}"
        chi_field = state.chi.as_field()
        write_field(Path(f"{stem}_chi.nsms"), chi_field)
        write_field(Path(f"{stem}_mu.nsms"), state.mu)
        write_field(Path(f"{stem}_v.nsms"), state.v)
        if output.pgm_preview:
            write_pgm(Path(f"{stem}_chi.pgm"), chi_field, 0.0, 1.0)

    def run(self) -> EnergyLedger:
        """
        Execute ``ceil(T / h)`` steps.

        Raises:
            StepFailedError: wrapping any solver error, with the failing step index
            LedgerViolationError: if the summed inequality fails at the end
        """
        started = time.perf_counter()
        steps = self.config.steps
        state = self.initial_state()
        self.ledger.append(self._initial_row(state))
        self._dump(state)
        logger.info(
            f"🚀 Coupled run: n={self.grid.n}, h={self.config.scheme.h:g}, {steps} steps, "
            f"delta={self.config.delta:g}"
        )

        for _ in range(steps):
            try:
                state, row = self.advance(state)
                self._check_step(self.ledger.rows[-1], row)
            except NsmsError as e:
                logger.exception(f"❌ Step {state.step + 1} failed: {e}")
                raise StepFailedError(state.step + 1, e) from e
            self.ledger.append(row)
            solver_metrics.record_step()
            self._dump(state)
            logger.info(
                f"Step {row.step}: t={row.t:.6g} kinetic={row.kinetic:.6g} "
                f"perimeter={row.perimeter:.6g} lambda={row.lambda_:.6g}",
                extra={"step": row.step, "kinetic": row.kinetic, "perimeter": row.perimeter},
            )

        self.state = state
        if self.write_outputs:
            write_ledger(self.ledger, self.config.output.resolved_ledger_path)
            dump_run_config(self.config, self.config.output.directory / "run.ini")

        verdict = energy_ledger_check(self.ledger, self.config)
        if not verdict:
            raise LedgerViolationError(
                "summed energy ledger", verdict.lhs, verdict.rhs, verdict.first_failing_row
            )

        snapshot = solver_metrics.get_snapshot()
        logger.info(
            f"✅ Coupled run finished in {time.perf_counter() - started:.2f}s: "
            f"{snapshot.steps_completed} steps, anneal acceptance {snapshot.acceptance_rate:.1%}, "
            f"{snapshot.picard_iterations} Picard / {snapshot.cg_iterations} CG iterations"
        )
        logger.debug(f"📊 Solver metrics uptime {solver_metrics.get_uptime():.1f}s")
        return self.ledger


def run_coupled(config: RunConfig, write_outputs: bool = True) -> EnergyLedger:
    return CoupledRunner(config, write_outputs).run()
