"""
Command-line entry point: ``python -m src.main <command> ...``.

Commands:
    run <config>                     coupled run, writes ledger and dumps
    check-ledger <csv> [--config]    re-verify the summed energy inequality
    sweep-eps <config> --eps a,b,c   diffuse vs sharp interface comparison
    dump-view <field> [-o out.pgm]   grayscale preview of a field dump
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from src.config import get_settings
from src.core.field_io import read_field, write_pgm
from src.core.grid import ScalarField
from src.core.logging_handler import setup_logging
from src.driver.coupled import run_coupled
from src.driver.ledger import energy_ledger_check, load_ledger
from src.driver.sharp_limit import sharp_limit_experiment
from src.exceptions import (
    BookkeepingError,
    ConfigurationError,
    DegeneratePhaseError,
    FieldFormatError,
    LedgerViolationError,
    MassMismatchError,
    NoConvergenceError,
    NsmsError,
    ResolutionError,
    StepFailedError,
)
from src.models.run_config import load_run_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3
EXIT_NO_CONVERGENCE = 4


def exit_code_for(error: NsmsError) -> int:
    if isinstance(error, StepFailedError):
        inner = error.error
        return exit_code_for(inner) if isinstance(inner, NsmsError) else EXIT_VIOLATION
    match error:
        case ConfigurationError() | FieldFormatError() | ResolutionError():
            return EXIT_CONFIG
        case NoConvergenceError():
            return EXIT_NO_CONVERGENCE
        case LedgerViolationError() | BookkeepingError() | MassMismatchError() | DegeneratePhaseError():
            return EXIT_VIOLATION
        case _:
            return EXIT_VIOLATION


def _parse_eps(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid eps list '{text}'") from e


def cmd_run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    ledger = run_coupled(config)
    print(f"{len(ledger) - 1} steps, ledger at {config.output.resolved_ledger_path}")
    return EXIT_OK


def cmd_check_ledger(args: argparse.Namespace) -> int:
    config_path = args.config or Path(args.ledger).parent / "run.ini"
    config = load_run_config(config_path)
    ledger = load_ledger(args.ledger)
    verdict = energy_ledger_check(ledger, config)
    if not verdict:
        print(f"ledger violated at row {verdict.first_failing_row}: {verdict.lhs:.17g} > {verdict.rhs:.17g}")
        return EXIT_VIOLATION
    print(f"ledger ok ({len(ledger)} rows, worst margin {verdict.worst_margin:.3e})")
    return EXIT_OK


def cmd_sweep_eps(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    report = sharp_limit_experiment(config, args.eps)
    print(f"kappa_mm={report.kappa_mm:.10g} interface_length={report.interface_length:.6g}")
    print("eps,symmetric_difference,energy_per_length")
    for entry in report.entries:
        print(f"{entry.eps:.6g},{entry.symmetric_difference:.10g},{entry.energy_per_length:.10g}")
    print(f"monotone={report.monotone}")
    return EXIT_OK


def cmd_dump_view(args: argparse.Namespace) -> int:
    field = read_field(args.field)
    if not isinstance(field, ScalarField):
        field = field.magnitude()
    output = args.output or Path(args.field).with_suffix(".pgm")
    write_pgm(output, field)
    print(f"wrote {output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    project = get_settings().project
    parser = argparse.ArgumentParser(
        prog="nsms", description="Navier-Stokes / Mullins-Sekerka minimizing-movement simulator"
    )
    parser.add_argument(
        "--version", action="version", version=f"{project.project_name} {project.version}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the coupled scheme")
    run.add_argument("config", type=Path, help="INI run configuration")
    run.set_defaults(handler=cmd_run)

    check = sub.add_parser("check-ledger", help="Verify a ledger CSV")
    check.add_argument("ledger", type=Path, help="Ledger CSV")
    check.add_argument("--config", type=Path, default=None, help="Run configuration (default: run.ini next to the ledger)")
    check.set_defaults(handler=cmd_check_ledger)

    sweep = sub.add_parser("sweep-eps", help="Compare Model H at several widths with the sharp run")
    sweep.add_argument("config", type=Path, help="INI run configuration")
    sweep.add_argument("--eps", type=_parse_eps, default=[0.08, 0.04, 0.02], help="Comma-separated decreasing widths")
    sweep.set_defaults(handler=cmd_sweep_eps)

    view = sub.add_parser("dump-view", help="Render a field dump as PGM")
    view.add_argument("field", type=Path, help="Field dump")
    view.add_argument("-o", "--output", type=Path, default=None, help="Output PGM path")
    view.set_defaults(handler=cmd_dump_view)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging(settings)
    logger.debug(
        f"{settings.project.project_name} {settings.project.version} ({settings.project.environment})"
    )
    try:
        return args.handler(args)
    except NsmsError as e:
        code = exit_code_for(e)
        logger.error(f"❌ {args.command} failed: {e}", extra={"exit_code": code})
        return code


if __name__ == "__main__":
    sys.exit(main())
