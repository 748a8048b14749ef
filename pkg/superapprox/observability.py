"""Structured logging helpers."""

import json
import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any


def configure_logging(level: int = logging.INFO) -> None:
    """Configure root logging once with a stable format."""
    logging.basicConfig(level=level, format="%(message)s")


def get_logger(name: str) -> logging.Logger:
    """Create a logger for a module."""
    return logging.getLogger(name)


def log_event(logger: logging.Logger, event: str, **fields: Any) -> None:
    """Emit a structured JSON log event."""
    payload = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "event": event,
        **fields,
    }
    logger.info(json.dumps(payload, default=str, sort_keys=True))


@contextmanager
def timed_event(
    logger: logging.Logger, event: str, **fields: Any
) -> Iterator[dict[str, Any]]:
    """
    Time a block and emit ``event`` with a ``seconds`` field when it exits.

    The yielded dict collects extra fields discovered inside the block; the
    final wall time is written back into it under ``seconds``.
    """
    extra: dict[str, Any] = {}
    start = time.perf_counter()
    try:
        yield extra
    finally:
        extra["seconds"] = time.perf_counter() - start
        log_event(logger, event, **fields, **extra)
