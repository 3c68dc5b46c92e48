"""
Custom exceptions for the NSMS simulator.
"""


class NsmsError(Exception):
    """Base exception for the simulator."""


class ConfigurationError(NsmsError):
    """Configuration-related errors."""

    def __init__(self, message: str, source: str | None = None) -> None:
        self.source = source
        self.message = message
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{message}")


class FieldFormatError(NsmsError):
    """A field dump could not be decoded."""

    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"Invalid field file {path}: {reason}")


class CompatibilityError(NsmsError):
    """Right-hand side of a periodic Poisson problem has nonzero mean."""

    def __init__(self, mean: float, scale: float, tolerance: float) -> None:
        self.mean = mean
        self.scale = scale
        self.tolerance = tolerance
        super().__init__(
            f"Field mean {mean:.3e} exceeds {tolerance:.1e} * max|f| = {tolerance * scale:.3e}"
        )


class DegeneratePhaseError(NsmsError):
    """Phase field too close to all-zeros / all-ones for the requested operation."""

    def __init__(self, reason: str, value: float | None = None) -> None:
        self.reason = reason
        self.value = value
        suffix = f" (value={value:.3e})" if value is not None else ""
        super().__init__(f"Degenerate phase: {reason}{suffix}")


class MassMismatchError(NsmsError):
    """Two binary phases that must share a mass do not."""

    def __init__(self, expected: int, actual: int) -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(f"Phase mass mismatch: expected {expected} cells, got {actual}")


class NoConvergenceError(NsmsError):
    """An iterative solve failed to reach its tolerance."""

    def __init__(self, solver: str, iterations: int, residual: float, tolerance: float) -> None:
        self.solver = solver
        self.iterations = iterations
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"{solver} did not converge after {iterations} iterations "
            f"(residual {residual:.3e} > tolerance {tolerance:.1e})"
        )


class ResolutionError(NsmsError):
    """Interface width not resolved by the grid."""

    def __init__(self, eps: float, dx: float, factor: float = 3.0) -> None:
        self.eps = eps
        self.dx = dx
        self.factor = factor
        super().__init__(f"eps={eps:g} is below {factor:g}*dx={factor * dx:g}")


class LedgerViolationError(NsmsError):
    """A discrete energy inequality failed beyond tolerance."""

    def __init__(self, inequality: str, lhs: float, rhs: float, row: int | None = None) -> None:
        self.inequality = inequality
        self.lhs = lhs
        self.rhs = rhs
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"{inequality} violated{where}: lhs={lhs:.17g} > rhs={rhs:.17g}")


class BookkeepingError(NsmsError):
    """Incrementally maintained energy drifted from a from-scratch evaluation."""

    def __init__(self, incremental: float, exact: float) -> None:
        self.incremental = incremental
        self.exact = exact
        super().__init__(f"Incremental F^h={incremental:.17g} disagrees with exact {exact:.17g}")


class StepFailedError(NsmsError):
    """A time step of the coupled loop failed."""

    def __init__(self, step: int, error: Exception) -> None:
        self.step = step
        self.error = error
        super().__init__(f"Step {step} failed: {type(error).__name__}: {error}")
