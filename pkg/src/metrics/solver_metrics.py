"""
Real-time solver metrics collector.
"""

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime
from threading import Lock

logger = logging.getLogger(__name__)


@dataclass
class SolverMetricsSnapshot:
    """Snapshot of accumulated solver metrics."""

    timestamp: datetime = field(default_factory=datetime.now)

    # Minimizing movement
    anneal_proposals: int = 0
    anneal_accepted: int = 0
    anneal_resyncs: int = 0

    # Momentum solve
    picard_iterations: int = 0
    cg_iterations: int = 0
    picard_warnings: int = 0

    # Time stepping
    steps_completed: int = 0
    diffuse_steps_completed: int = 0

    # Wall time per timed function, seconds
    timings: dict[str, float] = field(default_factory=dict)
    calls: dict[str, int] = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return self.anneal_accepted / self.anneal_proposals if self.anneal_proposals else 0.0


class SolverMetricsCollector:
    """
    Collect solver counters and timings.

    Thread-safe singleton shared by concurrent sweep trajectories.
    """

    _instance = None
    _lock = Lock()

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._initialized = False
        return cls._instance

    def __init__(self) -> None:
        if self._initialized:
            return

        self._initialized = True
        self.current = SolverMetricsSnapshot()
        self.start_time = time.time()

        logger.debug("📊 Solver metrics collector initialized")

    def record_anneal(self, proposals: int, accepted: int, resyncs: int) -> None:
        with self._lock:
            self.current.anneal_proposals += proposals
            self.current.anneal_accepted += accepted
            self.current.anneal_resyncs += resyncs

    def record_momentum_solve(self, picard_iterations: int, cg_iterations: int, warned: bool) -> None:
        """
        Record one momentum solve.

        Args:
            picard_iterations: Outer fixed-point iterations used
            cg_iterations: Total inner CG iterations
            warned: Whether the Picard residual misbehaved
        """

        with self._lock:
            self.current.picard_iterations += picard_iterations
            self.current.cg_iterations += cg_iterations
            if warned:
                self.current.picard_warnings += 1

    def record_step(self, diffuse: bool = False) -> None:
        with self._lock:
            if diffuse:
                self.current.diffuse_steps_completed += 1
            else:
                self.current.steps_completed += 1

    def record_timing(self, name: str, seconds: float) -> None:
        with self._lock:
            self.current.timings[name] = self.current.timings.get(name, 0.0) + seconds
            self.current.calls[name] = self.current.calls.get(name, 0) + 1

    def get_snapshot(self) -> SolverMetricsSnapshot:
        """Get a copy of the current metrics."""

        with self._lock:
            return SolverMetricsSnapshot(
                timestamp=datetime.now(),
                anneal_proposals=self.current.anneal_proposals,
                anneal_accepted=self.current.anneal_accepted,
                anneal_resyncs=self.current.anneal_resyncs,
                picard_iterations=self.current.picard_iterations,
                cg_iterations=self.current.cg_iterations,
                picard_warnings=self.current.picard_warnings,
                steps_completed=self.current.steps_completed,
                diffuse_steps_completed=self.current.diffuse_steps_completed,
                timings=self.current.timings.copy(),
                calls=self.current.calls.copy(),
            )

    def reset(self) -> None:
        """Reset all metrics."""

        with self._lock:
            self.current = SolverMetricsSnapshot()
            self.start_time = time.time()
            logger.debug("🔄 Solver metrics reset")

    def get_uptime(self) -> float:
        return time.time() - self.start_time


solver_metrics = SolverMetricsCollector()
