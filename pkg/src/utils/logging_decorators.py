"""
Decorators for automatic timing and logging of solver entry points.
"""

import functools
import inspect
import logging
import time
from collections.abc import Callable

from src.metrics.solver_metrics import solver_metrics


def log_timed(logger_name: str | None = None, level: int = logging.DEBUG):
    """
    Decorator that logs entry, duration and failures of a function and feeds the
    elapsed time to the solver metrics collector.

    Usage:
        @log_timed()
        def ns_step(...):
            ...
    """

    def decorator(func: Callable) -> Callable:
        func_logger = logging.getLogger(logger_name or func.__module__)
        func_name = func.__qualname__

        def _completed(start_time: float) -> None:
            elapsed = time.perf_counter() - start_time
            solver_metrics.record_timing(func_name, elapsed)
            func_logger.log(
                level,
                f"Completed {func_name} in {elapsed * 1000:.2f}ms",
                extra={"function": func_name, "execution_time_ms": int(elapsed * 1000)},
            )

        def _failed(start_time: float, e: Exception) -> None:
            elapsed = time.perf_counter() - start_time
            func_logger.error(
                f"❌ Error in {func_name}: {e!s}",
                extra={
                    "function": func_name,
                    "execution_time_ms": int(elapsed * 1000),
                    "error_type": type(e).__name__,
                },
            )

        @functools.wraps(func)
        async def async_wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = await func(*args, **kwargs)
            except Exception as e:
                _failed(start_time, e)
                raise
            _completed(start_time)
            return result

        @functools.wraps(func)
        def sync_wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                _failed(start_time, e)
                raise
            _completed(start_time)
            return result

        if inspect.iscoroutinefunction(func):
            return async_wrapper
        return sync_wrapper

    return decorator
