"""
Logging setup: console output, optional rotating log file and JSON-lines records.
"""

import json
import logging
import traceback
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path

from src.config import Settings, get_settings

# LogRecord attributes that are not user-supplied ``extra`` context
_RESERVED = {
    "name",
    "msg",
    "args",
    "created",
    "filename",
    "funcName",
    "levelname",
    "levelno",
    "lineno",
    "module",
    "msecs",
    "message",
    "pathname",
    "process",
    "processName",
    "relativeCreated",
    "thread",
    "threadName",
    "taskName",
    "exc_info",
    "exc_text",
    "stack_info",
    "asctime",
}


class JsonLinesFormatter(logging.Formatter):
    """One JSON object per record, carrying the ``extra`` context as ``data``."""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "timestamp": datetime.fromtimestamp(record.created).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "function": record.funcName,
            "line": record.lineno,
            "message": record.getMessage(),
        }
        if record.exc_info:
            exc_type, exc_value, _exc_tb = record.exc_info
            entry["exception_type"] = exc_type.__name__ if exc_type else None
            entry["exception_message"] = str(exc_value) if exc_value else None
            entry["stack_trace"] = "".join(traceback.format_exception(*record.exc_info))

        extra_data = {key: value for key, value in record.__dict__.items() if key not in _RESERVED}
        if extra_data:
            entry["data"] = extra_data
        return json.dumps(entry, default=str, ensure_ascii=False)


_installed: list[logging.Handler] = []


def setup_logging(settings: Settings | None = None, force: bool = False) -> logging.Logger:
    """
    Configure the root logger once.

    Args:
        settings: Application settings (cached settings when omitted)
        force: Replace handlers installed by an earlier call

    Returns:
        The root logger
    """
    root = logging.getLogger()
    if _installed and not force:
        return root

    settings = settings or get_settings()
    cfg = settings.logging
    level = "DEBUG" if settings.project.debug else cfg.log_level.upper()
    while _installed:
        root.removeHandler(_installed.pop())
    root.setLevel(level)

    console = logging.StreamHandler()
    console.setFormatter(logging.Formatter(cfg.log_format))
    _installed.append(console)

    if cfg.log_file:
        log_path = Path(cfg.log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_path, maxBytes=cfg.log_max_bytes, backupCount=cfg.log_backup_count, encoding="utf-8"
        )
        file_handler.setFormatter(
            JsonLinesFormatter() if cfg.log_json_enabled else logging.Formatter(cfg.log_format)
        )
        _installed.append(file_handler)

    for handler in _installed:
        root.addHandler(handler)
    root.debug(f"Logging configured at level {level}")
    return root
