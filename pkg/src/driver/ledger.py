"""
Energy ledger of a coupled run: rows, CSV persistence and the summed
dissipation inequality.
"""

import csv
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from src.config import get_settings
from src.exceptions import FieldFormatError
from src.models.run_config import RunConfig

logger = logging.getLogger(__name__)


@dataclass
class LedgerRow:
    """Energy terms of one step; row 0 holds the initial state."""

    step: int
    t: float
    kinetic: float
    perimeter: float
    grad_mu_sq: float = 0.0
    viscous: float = 0.0
    fh_initial: float = 0.0
    fh_final: float = 0.0
    lambda_: float = 0.0
    gibbs_thomson_residual: float = 0.0
    mu_h1: float = 0.0
    lambda_bound_ratio: float = 0.0
    picard_iterations: int = 0


COLUMNS = [f.name for f in fields(LedgerRow)]
CSV_NAMES = {"lambda_": "lambda"}


@dataclass
class EnergyLedger:
    rows: list[LedgerRow] = field(default_factory=list)

    def append(self, row: LedgerRow) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError(f"ledger time must increase ({row.t} after {self.rows[-1].t})")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def total_energy(self, index: int, kappa: float = 1.0) -> float:
        row = self.rows[index]
        return row.kinetic + kappa * row.perimeter


@dataclass
class LedgerVerdict:
    """Outcome of the summed inequality check."""

    ok: bool
    first_failing_row: int | None = None
    worst_margin: float = 0.0
    lhs: float = 0.0
    rhs: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def _format(value: float | int) -> str:
    return str(value) if isinstance(value, int) else format(value, ".17g")


def write_ledger(ledger: EnergyLedger, path: Path) -> Path:
    """CSV with a header row and 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([CSV_NAMES.get(c, c) for c in COLUMNS])
        for row in ledger.rows:
            values = asdict(row)
            writer.writerow([_format(values[c]) for c in COLUMNS])
    logger.debug(f"💾 Ledger with {len(ledger)} rows written to {path}")
    return path


def load_ledger(path: Path) -> EnergyLedger:
    path = Path(path)
    reverse = {v: k for k, v in CSV_NAMES.items()}
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            header = [reverse.get(name, name) for name in reader.fieldnames or []]
            if header != COLUMNS:
                raise FieldFormatError(str(path), f"unexpected ledger columns {reader.fieldnames}")
            ledger = EnergyLedger()
            for record in reader:
                values = {reverse.get(k, k): v for k, v in record.items()}
                ledger.rows.append(
                    LedgerRow(
                        step=int(values["step"]),
                        picard_iterations=int(values["picard_iterations"]),
                        **{
                            name: float(values[name])
                            for name in COLUMNS
                            if name not in {"step", "picard_iterations"}
                        },
                    )
                )
    except OSError as e:
        raise FieldFormatError(str(path), f"cannot read ledger ({e})")
    except (KeyError, ValueError) as e:
        raise FieldFormatError(str(path), f"malformed ledger row ({e})")
    return ledger


def per_step_dissipation(
    previous: LedgerRow, current: LedgerRow, h: float, kappa: float, mobility: float
) -> tuple[float, float]:
    """
    Both sides of the one-step energy inequality

        E_k + h int nu |Dv_k|^2 + (h m / 4) |grad mu0_k|^2
            <= E_{k-1} + h / (2 m) |v_{k-1}|^2 + (h / m) |v_k|^2

    with ``E = 1/2 |v|^2 + kappa Per``.
    """
    lhs = (
        current.kinetic
        + kappa * current.perimeter
        + h * current.viscous
        + 0.25 * h * mobility * current.grad_mu_sq
    )
    rhs = (
        previous.kinetic
        + kappa * previous.perimeter
        + h / mobility * previous.kinetic
        + 2.0 * h / mobility * current.kinetic
    )
    return lhs, rhs


def energy_ledger_check(ledger: EnergyLedger, config: RunConfig) -> LedgerVerdict:
    """
    Verify the summed energy inequality for every row.

    ``1/2 |v(t)|^2 + kappa Per(t) + sum [h int nu |Dv|^2 + (h m / 2) |grad mu0|^2]
    <= 1/2 |v0|^2 + kappa Per(0) + sum (2 h / m) |v|^2 + sum (h m / 4) |grad mu0|^2``
    """
    if not ledger.rows:
        return LedgerVerdict(ok=True)
    h = config.scheme.h
    kappa = config.physics.kappa
    mobility = config.physics.m
    tolerance = get_settings().numerics.energy_tolerance

    first = ledger.rows[0]
    dissipated = 0.0
    gronwall = 2.0 * h / mobility * 2.0 * first.kinetic
    absorbed = 0.0
    worst = 0.0
    for index, row in enumerate(ledger.rows[1:], start=1):
        dissipated += h * row.viscous + 0.5 * h * mobility * row.grad_mu_sq
        gronwall += 2.0 * h / mobility * 2.0 * row.kinetic
        absorbed += 0.25 * h * mobility * row.grad_mu_sq
        lhs = row.kinetic + kappa * row.perimeter + dissipated
        rhs = first.kinetic + kappa * first.perimeter + gronwall + absorbed
        margin = lhs - rhs - tolerance * (1.0 + abs(rhs))
        worst = max(worst, margin)
        if margin > 0:
            logger.warning(f"⚠️ Ledger inequality fails at row {index}: {lhs:.17g} > {rhs:.17g}")
            return LedgerVerdict(
                ok=False, first_failing_row=index, worst_margin=margin, lhs=lhs, rhs=rhs
            )
    return LedgerVerdict(ok=True, worst_margin=worst)
