"""
Diffuse-interface Navier-Stokes / Cahn-Hilliard (Model H) comparison solver.

Cahn-Hilliard is advanced with a linearly stabilized semi-implicit Fourier
scheme; the momentum equation reuses the implicit Navier-Stokes step with the
capillary force ``-c grad mu``. Also provides the Modica-Mortola constant,
the discrepancy measure, the primitive W of ``sqrt(2 f)`` and the optimal
one-dimensional profile.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, interpolate, ndimage, special

from src.config import get_settings
from src.core.grid import (
    FloatArray,
    Grid,
    ScalarField,
    VectorField,
    dirichlet_energy,
    divergence,
    gradient,
)
from src.exceptions import ConfigurationError, LedgerViolationError
from src.interface.geometry import BinaryPhase
from src.metrics.solver_metrics import solver_metrics
from src.solvers.navier_stokes import (
    NsStepConfig,
    capillary_forcing,
    solve_momentum,
    viscosity_field,
)

logger = logging.getLogger(__name__)

WellFunction = Callable[[FloatArray], FloatArray]


@dataclass(frozen=True)
class DoubleWell:
    """
    Double-well potential with wells at 0 and 1.

    Attributes
    ----------
    f, df, d2f : callable
        The potential and its first two derivatives, vectorized over arrays.
    name : str
        Label used in logs and reports.
    """

    f: WellFunction
    df: WellFunction
    d2f: WellFunction
    name: str = "custom"

    def __post_init__(self) -> None:
        wells = self.f(np.array([0.0, 1.0]))
        if np.max(np.abs(wells)) > 1e-12:
            raise ConfigurationError(f"double well '{self.name}' must vanish at 0 and 1")

    @classmethod
    def quartic(cls, scale: float = 1.0) -> Self:
        """``scale * c^2 (1 - c)^2``."""
        return cls(
            f=lambda c: scale * c * c * (1.0 - c) ** 2,
            df=lambda c: scale * 2.0 * c * (1.0 - c) * (1.0 - 2.0 * c),
            d2f=lambda c: scale * (2.0 - 12.0 * c + 12.0 * c * c),
            name="quartic" if scale == 1.0 else f"quartic*{scale:g}",
        )

    @cached_property
    def stabilization(self) -> float:
        """Twice the largest curvature of f on [-0.2, 1.2]."""
        samples = np.linspace(-0.2, 1.2, 2801)
        return 2.0 * max(float(np.max(self.d2f(samples))), 0.0)

    def truncated(self, c: FloatArray) -> FloatArray:
        """f capped by ``1 + c^2`` so that ``sqrt(2 f)`` grows at most linearly."""
        return np.minimum(np.maximum(self.f(c), 0.0), 1.0 + c * c)


@dataclass(frozen=True)
class DiffuseState:
    """Order parameter, velocity and model constants at time t."""

    c: ScalarField
    v: VectorField
    eps: float
    mobility: float = 1.0
    t: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.c.grid


class ModelHConfig(BaseModel):
    """Time stepping of the diffuse solver."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(..., gt=0, description="Time step")
    stabilization: float | None = Field(None, ge=0, description="Linear stabilization S; None uses 2 max f''")
    threshold: float | None = Field(
        None, gt=0, description="Largest dt for which energy decay is enforced; None uses the mobility"
    )


@dataclass
class ModelHRecord:
    """Energy record of one diffuse step."""

    step: int
    t: float
    kinetic: float
    ginzburg_landau: float
    mean_c: float

    @property
    def total(self) -> float:
        return self.kinetic + self.ginzburg_landau


def ginzburg_landau_energy(c: ScalarField, eps: float, well: DoubleWell) -> float:
    """``int eps/2 |grad c|^2 + f(c) / eps``."""
    bulk = ScalarField(c.grid, well.f(c.values)).integral()
    return 0.5 * eps * dirichlet_energy(c) + bulk / eps


def ch_step(
    state: DiffuseState, dt: float, well: DoubleWell, stabilization: float | None = None
) -> tuple[ScalarField, ScalarField]:
    """
    One stabilized semi-implicit Cahn-Hilliard step with advection by ``state.v``.

    Returns:
        The new order parameter and the chemical potential
    """
    if dt <= 0:
        raise ConfigurationError(f"time step dt={dt} must be positive")
    grid = state.grid
    eps = state.eps
    mobility = state.mobility
    s = well.stabilization if stabilization is None else stabilization
    k2 = grid.k_squared

    c = state.c.values
    c_hat = grid.forward(c)
    advection_hat = divergence(state.v.scaled_by(state.c)).spectrum()
    explicit_hat = grid.forward(well.df(c) / eps - (s / eps) * c)

    denominator = 1.0 + dt * mobility * k2 * (s / eps + eps * k2)
    c_new_hat = (c_hat - dt * advection_hat - dt * mobility * k2 * explicit_hat) / denominator
    mu_hat = grid.forward(well.df(c) / eps) + (s / eps) * (c_new_hat - c_hat) + eps * k2 * c_new_hat
    return ScalarField(grid, grid.inverse(c_new_hat)), ScalarField(grid, grid.inverse(mu_hat))


def nsch_step(
    state: DiffuseState,
    dt: float,
    well: DoubleWell,
    nu_minus: float,
    nu_plus: float,
    ns_cfg: NsStepConfig | None = None,
    stabilization: float | None = None,
) -> DiffuseState:
    """Cahn-Hilliard step followed by the momentum step it forces."""
    c_new, mu = ch_step(state, dt, well, stabilization)
    nu = viscosity_field(c_new, nu_minus, nu_plus)
    forcing = capillary_forcing(state.c, mu, dealiased=False)
    cfg = ns_cfg.model_copy(update={"h": dt}) if ns_cfg is not None else NsStepConfig(h=dt)
    momentum = solve_momentum(state.v, nu, forcing, cfg)
    solver_metrics.record_step(diffuse=True)
    return replace(state, c=c_new, v=momentum.v_new, t=state.t + dt)


def run_model_h(
    state: DiffuseState,
    cfg: ModelHConfig,
    steps: int,
    well: DoubleWell,
    nu_minus: float,
    nu_plus: float,
    ns_cfg: NsStepConfig | None = None,
) -> tuple[DiffuseState, list[ModelHRecord]]:
    """
    Advance the diffuse model and check that kinetic plus Ginzburg-Landau energy decays.

    Raises:
        LedgerViolationError: if the energy grows while ``dt`` is below the threshold
    """
    threshold = cfg.threshold if cfg.threshold is not None else state.mobility
    enforce = cfg.dt <= threshold
    if not enforce:
        logger.warning(
            f"⚠️ dt={cfg.dt:g} exceeds {threshold:g}; diffuse energy decay is only monitored"
        )
    tolerance = get_settings().numerics.energy_tolerance

    def record(step: int, current: DiffuseState) -> ModelHRecord:
        return ModelHRecord(
            step=step,
            t=current.t,
            kinetic=0.5 * current.v.inner(current.v),
            ginzburg_landau=ginzburg_landau_energy(current.c, current.eps, well),
            mean_c=current.c.mean(),
        )

    records = [record(0, state)]
    for step in range(1, steps + 1):
        state = nsch_step(state, cfg.dt, well, nu_minus, nu_plus, ns_cfg, cfg.stabilization)
        records.append(record(step, state))
        before, after = records[-2].total, records[-1].total
        if after > before + tolerance * (1.0 + abs(before)):
            if enforce:
                raise LedgerViolationError("diffuse energy decay", after, before, step)
            logger.warning(f"⚠️ Diffuse energy grew at step {step}: {before:.10g} -> {after:.10g}")

    logger.info(
        f"✅ Model H run finished: eps={state.eps:g}, {steps} steps, "
        f"energy {records[0].total:.6g} -> {records[-1].total:.6g}"
    )
    return state, records


def modica_mortola_kappa(well: DoubleWell) -> float:
    """``int_0^1 sqrt(2 f(s)) ds`` by adaptive quadrature."""
    value, error = integrate.quad(
        lambda s: np.sqrt(2.0 * max(float(well.f(np.float64(s))), 0.0)),
        0.0,
        1.0,
        epsabs=1e-12,
        epsrel=1e-10,
    )
    logger.debug(f"Modica-Mortola constant for '{well.name}': {value:.12g} (+/- {error:.1e})")
    return float(value)


def discrepancy(c: ScalarField, eps: float, well: DoubleWell) -> ScalarField:
    """Pointwise ``eps/2 |grad c|^2 - f(c) / eps``."""
    grad = gradient(c)
    density = grad.x.values**2 + grad.y.values**2
    return ScalarField(c.grid, 0.5 * eps * density - well.f(c.values) / eps)


def _w_table(well: DoubleWell, lower: float, upper: float) -> interpolate.PchipInterpolator:
    """Monotone interpolant of ``W(s) = int_0^s sqrt(2 f~)`` on [lower, upper]."""
    nodes = np.unique(
        np.concatenate([
            np.linspace(lower, 0.0, 65),
            np.linspace(0.0, 1.0, 257),
            np.linspace(1.0, upper, 65),
        ])
    )

    def integrand(s: float) -> float:
        return float(np.sqrt(2.0 * well.truncated(np.float64(s))))

    increments = np.array([
        integrate.quad(integrand, a, b, epsabs=1e-13)[0] for a, b in zip(nodes[:-1], nodes[1:], strict=True)
    ])
    cumulative = np.concatenate([[0.0], np.cumsum(increments)])
    cumulative -= cumulative[np.searchsorted(nodes, 0.0)]
    return interpolate.PchipInterpolator(nodes, cumulative, extrapolate=True)


def w_transform(c: ScalarField, well: DoubleWell) -> ScalarField:
    """W(c) with ``W(0) = 0``; ``W(1)`` is the Modica-Mortola constant."""
    lower = min(float(c.values.min()), 0.0) - 0.05
    upper = max(float(c.values.max()), 1.0) + 0.05
    table = _w_table(well, lower, upper)
    return ScalarField(c.grid, table(c.values))


def w_gradient_l1(c: ScalarField, well: DoubleWell) -> float:
    """``int |grad W(c)|`` evaluated by the chain rule."""
    grad = gradient(c)
    speed = np.sqrt(2.0 * well.truncated(c.values))
    return float(np.sum(speed * np.hypot(grad.x.values, grad.y.values))) * c.grid.cell_area


def periodic_signed_distance(phase: BinaryPhase) -> ScalarField:
    """Distance to the interface, positive in phase 1, with the interface between cell centres."""
    grid = phase.grid
    tiled = np.tile(phase.chi, (3, 3))
    n = grid.n
    centre = (slice(n, 2 * n), slice(n, 2 * n))
    inside = ndimage.distance_transform_edt(tiled)[centre]
    outside = ndimage.distance_transform_edt(1 - tiled)[centre]
    distance = np.where(phase.chi == 1, inside - 0.5, -(outside - 0.5)) * grid.dx
    return ScalarField(grid, distance)


def optimal_profile(signed_distance: ScalarField, eps: float) -> ScalarField:
    """``1 / (1 + exp(-sqrt(2) d / eps))``, the optimal profile of the quartic well."""
    if eps <= 0:
        raise ConfigurationError(f"interface width eps={eps} must be positive")
    return ScalarField(signed_distance.grid, special.expit(np.sqrt(2.0) * signed_distance.values / eps))


def diffuse_state_from_phase(
    phase: BinaryPhase, v: VectorField, eps: float, mobility: float = 1.0
) -> DiffuseState:
    """Well-prepared diffuse data: the optimal profile around the sharp interface."""
    return DiffuseState(
        c=optimal_profile(periodic_signed_distance(phase), eps), v=v, eps=eps, mobility=mobility
    )
