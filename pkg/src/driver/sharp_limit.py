"""
Sharp-interface cross-check: diffuse trajectories at shrinking widths eps
compared with the minimizing-movement trajectory from the same phase.
"""

import asyncio
import logging
import math
import time
from dataclasses import dataclass, field

from src.config import get_settings
from src.driver.coupled import CoupledRunner, ns_config
from src.driver.initial_data import build_grid, build_initial_phase, build_initial_velocity
from src.exceptions import ConfigurationError, ResolutionError, StepFailedError
from src.interface.geometry import BinaryPhase, perimeter
from src.models.run_config import RunConfig
from src.solvers.model_h import (
    DoubleWell,
    ModelHConfig,
    diffuse_state_from_phase,
    ginzburg_landau_energy,
    modica_mortola_kappa,
    run_model_h,
)

logger = logging.getLogger(__name__)


@dataclass
class SharpLimitEntry:
    """Comparison at one interface width."""

    eps: float
    symmetric_difference: float
    energy_per_length: float
    steps: int


@dataclass
class SharpLimitReport:
    """
    Per-width comparison of the diffuse and sharp interfaces at the horizon.

    ``monotone`` holds when the symmetric-difference area does not grow as eps
    decreases, up to one cell band along the sharp interface.
    """

    kappa_mm: float
    interface_length: float
    band_tolerance: float
    entries: list[SharpLimitEntry] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        areas = [e.symmetric_difference for e in self.entries]
        return all(b <= a + self.band_tolerance for a, b in zip(areas, areas[1:], strict=False))


def validate_widths(eps_list: list[float], dx: float) -> None:
    """
    Raises:
        ResolutionError: if a width is below three cells
        ConfigurationError: if the list is not strictly decreasing
    """
    for eps in eps_list:
        if eps < 3.0 * dx:
            raise ResolutionError(eps, dx)
    for a, b in zip(eps_list, eps_list[1:], strict=False):
        if b >= a:
            raise ConfigurationError(f"widths must decrease, got {b:g} after {a:g}", "eps_list")


def _sharp_run(config: RunConfig, kappa: float) -> BinaryPhase:
    physics = config.physics.model_copy(update={"kappa": kappa})
    runner = CoupledRunner(config.model_copy(update={"physics": physics}), write_outputs=False)
    runner.run()
    if runner.state is None:
        raise StepFailedError(0, RuntimeError("sharp run finished without a final state"))
    return runner.state.chi


def _diffuse_run(
    config: RunConfig, eps: float, well: DoubleWell, sharp: BinaryPhase, interface_length: float
) -> SharpLimitEntry:
    grid = build_grid(config)
    section = config.model_h
    dt = section.dt if section.dt is not None else config.scheme.h
    mobility = section.mobility if section.mobility is not None else config.physics.m
    steps = math.ceil(config.scheme.horizon / dt - 1e-9)

    state = diffuse_state_from_phase(
        build_initial_phase(config, grid), build_initial_velocity(config, grid), eps, mobility
    )
    final, _ = run_model_h(
        state,
        ModelHConfig(dt=dt, stabilization=section.stabilization, threshold=section.threshold),
        steps,
        well,
        config.physics.nu_minus,
        config.physics.nu_plus,
        ns_config(config),
    )
    diffuse = BinaryPhase.from_field(final.c)
    energy = ginzburg_landau_energy(final.c, eps, well)
    return SharpLimitEntry(
        eps=eps,
        symmetric_difference=diffuse.symmetric_difference(sharp) * grid.cell_area,
        energy_per_length=energy / interface_length if interface_length > 0 else math.inf,
        steps=steps,
    )


async def _sweep(
    config: RunConfig, eps_list: list[float], well: DoubleWell, sharp: BinaryPhase, interface_length: float
) -> list[SharpLimitEntry]:
    semaphore = asyncio.Semaphore(get_settings().sweep.sweep_max_concurrent)

    async def run_with_semaphore(eps: float) -> SharpLimitEntry:
        async with semaphore:
            logger.info(f"🔄 Diffuse trajectory eps={eps:g}")
            return await asyncio.to_thread(_diffuse_run, config, eps, well, sharp, interface_length)

    # gather keeps input order
    return list(await asyncio.gather(*(run_with_semaphore(eps) for eps in eps_list)))


def sharp_limit_experiment(
    config: RunConfig, eps_list: list[float], well: DoubleWell | None = None
) -> SharpLimitReport:
    """
    Run the diffuse model for every eps and compare with the sharp trajectory.

    The sharp run uses the surface tension ``kappa`` that the diffuse energy
    converges to, so both trajectories carry the same interfacial energy.

    Args:
        config: Run configuration shared by all trajectories
        eps_list: Decreasing interface widths, each at least three cells
        well: Double-well potential (quartic by default)

    Returns:
        The per-width report

    Raises:
        ResolutionError: on unresolved widths
        ConfigurationError: on non-decreasing widths
    """
    well = well or DoubleWell.quartic()
    kappa_mm = modica_mortola_kappa(well)
    validate_widths(eps_list, config.dx)
    if not eps_list:
        return SharpLimitReport(kappa_mm=kappa_mm, interface_length=0.0, band_tolerance=0.0)

    started = time.perf_counter()
    logger.info(f"🚀 Sharp-limit sweep over eps={eps_list} with kappa={kappa_mm:.6g}")
    sharp = _sharp_run(config, kappa_mm)
    interface_length = perimeter(sharp, config.delta)
    entries = asyncio.run(_sweep(config, eps_list, well, sharp, interface_length))

    report = SharpLimitReport(
        kappa_mm=kappa_mm,
        interface_length=interface_length,
        band_tolerance=interface_length * config.dx,
        entries=entries,
    )
    for entry in entries:
        logger.info(
            f"📊 eps={entry.eps:g}: symmetric difference {entry.symmetric_difference:.4g}, "
            f"energy per length {entry.energy_per_length:.4g} (kappa {kappa_mm:.4g})"
        )
    status = "✅" if report.monotone else "⚠️"
    logger.info(
        f"{status} Sharp-limit sweep finished in {time.perf_counter() - started:.1f}s, "
        f"monotone={report.monotone}"
    )
    return report
