"""
Implicit time step for incompressible Navier-Stokes with phase-dependent viscosity.

Solves for a divergence-free v

    (v - v_prev) / h + v_prev . grad v - div(2 nu D v) + grad p = f

where ``f = -chi grad mu`` unless a body force is given. The pressure is
eliminated by the Leray projection. The convective term is lagged in a Picard
loop so that each inner solve is symmetric positive definite on
divergence-free fields and can use preconditioned CG.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import LinearOperator, cg

from src.config import get_settings
from src.core.grid import (
    Grid,
    ScalarField,
    VectorField,
    dealias,
    divergence,
    gradient,
    mollify,
    product,
    symmetric_gradient,
    vector_product,
)
from src.core.hneg import HNegWorkspace, workspace_for
from src.exceptions import ConfigurationError, NoConvergenceError
from src.interface.geometry import BinaryPhase
from src.metrics.solver_metrics import solver_metrics
from src.utils.logging_decorators import log_timed

logger = logging.getLogger(__name__)


class NsStepConfig(BaseModel):
    """Parameters of one momentum step."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    h: float = Field(..., gt=0, description="Time step")
    picard_tol: float = Field(1e-8, gt=0, description="Relative Picard increment tolerance")
    picard_max: int = Field(50, ge=1, description="Maximum Picard iterations")
    cg_tol: float = Field(1e-10, gt=0, description="Relative CG residual tolerance")
    cg_maxiter: int = Field(500, ge=1, description="Maximum CG iterations per Picard iteration")


@dataclass
class NsStepResult:
    """Outcome of one momentum step."""

    v_new: VectorField
    picard_iterations: int
    picard_residual: float
    cg_iterations: int
    kinetic: float
    viscous_dissipation: float
    converged: bool


def viscosity_field(
    chi: BinaryPhase | ScalarField, nu_minus: float, nu_plus: float, delta: float | None = None
) -> ScalarField:
    """
    ``nu_plus`` in phase 1 and ``nu_minus`` in phase 0, blended over the mollified interface.

    A diffuse order parameter is used as the blend directly when ``delta`` is None.
    """
    if not (nu_minus > 0 and nu_plus > 0):
        raise ConfigurationError(f"viscosities must be positive (nu-={nu_minus}, nu+={nu_plus})")
    field = chi.as_field() if isinstance(chi, BinaryPhase) else chi
    blend = field if delta is None else mollify(field, delta)
    fraction = np.clip(blend.values, 0.0, 1.0)
    return ScalarField(field.grid, nu_minus + (nu_plus - nu_minus) * fraction)


def viscous_operator(v: VectorField, nu: ScalarField) -> VectorField:
    """``-div(2 nu D v)``."""
    (d_xx, d_xy), (d_yx, d_yy) = symmetric_gradient(v)
    two_nu = nu * 2.0
    return VectorField(
        -divergence(VectorField(d_xx * two_nu, d_xy * two_nu)),
        -divergence(VectorField(d_yx * two_nu, d_yy * two_nu)),
    )


def viscous_dissipation(v: VectorField, nu: ScalarField) -> float:
    """``int nu |D v|^2``."""
    (d_xx, d_xy), (_, d_yy) = symmetric_gradient(v)
    density = d_xx.values**2 + 2.0 * d_xy.values**2 + d_yy.values**2
    return float(np.sum(nu.values * density)) * nu.grid.cell_area


def convection(advecting: VectorField, v: VectorField) -> VectorField:
    """
    Skew-symmetric dealiased form of ``advecting . grad v``.

    Satisfies ``<convection(a, v), v> = 0`` for every a and v.
    """
    w = VectorField(dealias(v.x), dealias(v.y))
    components = []
    for w_i in (w.x, w.y):
        grad_w = gradient(w_i)
        advective = product(advecting.x, grad_w.x) + product(advecting.y, grad_w.y)
        conservative = divergence(vector_product(w_i, advecting))
        components.append((advective + conservative) * 0.5)
    return VectorField(components[0], components[1])


def capillary_forcing(
    phase: BinaryPhase | ScalarField, mu: ScalarField, dealiased: bool = True
) -> VectorField:
    """Capillary body force ``-phase * grad mu``."""
    field = phase.as_field() if isinstance(phase, BinaryPhase) else phase
    grad_mu = gradient(mu)
    if dealiased:
        return -vector_product(field, grad_mu)
    return -grad_mu.scaled_by(field)


class _MomentumSystem:
    """Projected ``1/h + (-div 2 nu D)`` on flattened divergence-free fields."""

    def __init__(self, grid: Grid, nu: ScalarField, h: float, ws: HNegWorkspace) -> None:
        self.grid = grid
        self.nu = nu
        self.h = h
        self.ws = ws
        size = 2 * grid.n * grid.n
        kx, ky = grid.derivative_wavenumbers
        nu_ref = float(nu.values.mean())
        self._inverse_diagonal = 1.0 / (1.0 / h + nu_ref * (kx * kx + ky * ky))
        self.operator = LinearOperator((size, size), matvec=self._apply, dtype=np.float64)
        self.preconditioner = LinearOperator((size, size), matvec=self._precondition, dtype=np.float64)

    def _apply(self, x: np.ndarray) -> np.ndarray:
        u = self.ws.leray_project(VectorField.unflatten(self.grid, np.ravel(x)))
        out = u / self.h + viscous_operator(u, self.nu)
        return self.ws.leray_project(out).flatten()

    def _precondition(self, x: np.ndarray) -> np.ndarray:
        u = VectorField.unflatten(self.grid, np.ravel(x))
        scaled = VectorField.from_arrays(
            self.grid,
            self.grid.inverse(self._inverse_diagonal * u.x.spectrum()),
            self.grid.inverse(self._inverse_diagonal * u.y.spectrum()),
        )
        return self.ws.leray_project(scaled).flatten()


def solve_momentum(
    v_prev: VectorField, nu: ScalarField, forcing: VectorField, cfg: NsStepConfig
) -> NsStepResult:
    """
    Picard iteration around preconditioned CG for the implicit momentum step.

    Raises:
        NoConvergenceError: if the Picard increment stays above ten times the tolerance
    """
    grid = v_prev.grid
    ws = workspace_for(grid)
    system = _MomentumSystem(grid, nu, cfg.h, ws)
    v_prev = ws.leray_project(v_prev)
    base_rhs = v_prev / cfg.h + ws.leray_project(forcing)

    cg_iterations = 0

    def count(_xk: np.ndarray) -> None:
        nonlocal cg_iterations
        cg_iterations += 1

    v_k = v_prev
    residual = math.inf
    previous = math.inf
    warned = False
    iterations = 0
    for iterations in range(1, cfg.picard_max + 1):
        rhs = base_rhs - ws.leray_project(convection(v_prev, v_k))
        solution, info = cg(
            system.operator,
            rhs.flatten(),
            x0=v_k.flatten(),
            rtol=cfg.cg_tol,
            atol=0.0,
            maxiter=cfg.cg_maxiter,
            M=system.preconditioner,
            callback=count,
        )
        if info > 0:
            logger.warning(f"⚠️ CG stopped at maxiter={cfg.cg_maxiter} in Picard iteration {iterations}")
        v_next = ws.leray_project(VectorField.unflatten(grid, solution))

        increment = (v_next - v_k).l2_norm()
        scale = v_next.l2_norm()
        residual = increment / scale if scale > 0 else increment
        if residual > previous and not warned:
            logger.warning(
                f"⚠️ Picard increment grew ({previous:.3e} -> {residual:.3e}); time step may be too large"
            )
            warned = True
        previous = residual
        v_k = v_next
        if residual <= cfg.picard_tol:
            break

    converged = residual <= cfg.picard_tol
    solver_metrics.record_momentum_solve(iterations, cg_iterations, warned or not converged)
    if not converged:
        if residual > 10.0 * cfg.picard_tol:
            raise NoConvergenceError("Picard iteration", iterations, residual, cfg.picard_tol)
        logger.warning(f"⚠️ Picard stopped at residual {residual:.3e} (tolerance {cfg.picard_tol:.1e})")

    return NsStepResult(
        v_new=v_k,
        picard_iterations=iterations,
        picard_residual=residual,
        cg_iterations=cg_iterations,
        kinetic=0.5 * v_k.inner(v_k),
        viscous_dissipation=viscous_dissipation(v_k, nu),
        converged=converged,
    )


@log_timed()
def ns_step(
    v_prev: VectorField,
    chi: BinaryPhase,
    mu: ScalarField,
    nu: ScalarField,
    cfg: NsStepConfig,
    body_force: VectorField | None = None,
) -> NsStepResult:
    """
    Advance the velocity by one implicit step.

    Args:
        v_prev: Divergence-free velocity at the previous step
        chi: Phase at the new step
        mu: Chemical potential at the new step
        nu: Viscosity field
        cfg: Step parameters
        body_force: Replaces the capillary force ``-chi grad mu`` when given

    Returns:
        NsStepResult with the new velocity and solver statistics
    """
    forcing = capillary_forcing(chi, mu) if body_force is None else body_force
    result = solve_momentum(v_prev, nu, forcing, cfg)
    logger.debug(
        f"NS step: {result.picard_iterations} Picard / {result.cg_iterations} CG iterations, "
        f"kinetic={result.kinetic:.6g}"
    )
    return result


def ns_energy_sides(
    v_new: NsStepResult | VectorField,
    v_prev: VectorField,
    chi: BinaryPhase | ScalarField,
    mu: ScalarField,
    nu: ScalarField,
    h: float,
    body_force: VectorField | None = None,
    dealiased: bool = True,
) -> tuple[float, float]:
    """
    Both sides of ``1/2 |v|^2 + h int nu |Dv|^2 <= 1/2 |v_prev|^2 + h <f, v>``.

    The forcing is rebuilt exactly as the step built it.
    """
    if isinstance(v_new, NsStepResult):
        v_new = v_new.v_new
    forcing = capillary_forcing(chi, mu, dealiased) if body_force is None else body_force
    lhs = 0.5 * v_new.inner(v_new) + h * viscous_dissipation(v_new, nu)
    rhs = 0.5 * v_prev.inner(v_prev) + h * forcing.inner(v_new)
    return lhs, rhs


def ns_energy_check(
    v_new: NsStepResult | VectorField,
    v_prev: VectorField,
    chi: BinaryPhase | ScalarField,
    mu: ScalarField,
    nu: ScalarField,
    h: float,
    body_force: VectorField | None = None,
    dealiased: bool = True,
) -> bool:
    """Momentum energy inequality within the configured tolerance."""
    lhs, rhs = ns_energy_sides(v_new, v_prev, chi, mu, nu, h, body_force, dealiased)
    tolerance = get_settings().numerics.energy_tolerance
    ok = lhs <= rhs + tolerance * (1.0 + abs(rhs))
    if not ok:
        logger.warning(f"⚠️ Momentum energy inequality failed: {lhs:.17g} > {rhs:.17g}")
    return ok
