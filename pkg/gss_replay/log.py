"""
Logging setup for gss-replay.

Human-readable colorized lines by default, one JSON object per line when
``GSS_JSON_LOGS`` is true. Every record carries whatever run context
(seed, strategy, benchmark) was bound with ``get_logger``.

Usage:
    from gss_replay.log import get_logger, log_duration

    log = get_logger(__name__, strategy="gss-greedy", seed=0)
    log.info("Evaluated model", examples_seen=100, accuracy=0.91)

    with log_duration(log, "Finished run"):
        run_online(stream, strategy, model, config)
"""
import os
import sys
import time
from contextlib import contextmanager
from typing import Optional

from loguru import logger

RUN_CONTEXT = ("benchmark", "strategy", "seed")


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").lower() in ("1", "true", "yes")


def _human_format(record) -> str:
    context = " ".join(
        f"{key}={record['extra'][key]}" for key in RUN_CONTEXT if key in record["extra"]
    )
    prefix = (
        "<green>{time:HH:mm:ss.SSS}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan> - "
    )
    if context:
        prefix += "<magenta>[" + context.replace("{", "{{").replace("}", "}}") + "]</magenta> "
    return prefix + "<level>{message}</level>\n{exception}"


def configure_logging(
    *,
    json_logs: Optional[bool] = None,
    level: Optional[str] = None,
    diagnose: bool = False,
) -> None:
    """
    Configure loguru for gss-replay.

    Args:
        json_logs: JSON lines if True, colorized if False, ``GSS_JSON_LOGS`` if None.
        level: Minimum level; defaults to ``GSS_LOG_LEVEL`` or INFO.
        diagnose: Include local variables in exception traces.
    """
    logger.remove()
    if json_logs is None:
        json_logs = _env_flag("GSS_JSON_LOGS")
    level = (level or os.getenv("GSS_LOG_LEVEL") or "INFO").upper()

    if json_logs:
        logger.add(sys.stderr, format="{message}", serialize=True, level=level, diagnose=diagnose)
    else:
        logger.add(sys.stderr, format=_human_format, colorize=True, level=level, diagnose=diagnose)

    logger.debug("Logging configured", format="json" if json_logs else "human", level=level)


def get_logger(name: str, **context):
    """Logger bound to ``name`` plus run context (seed, strategy, benchmark, ...)."""
    return logger.bind(name=name, **context)


@contextmanager
def log_duration(log_instance, message: str, **extra_context):
    """Log ``message`` with the elapsed wall time once the block exits."""
    start = time.perf_counter()
    try:
        yield
    finally:
        log_instance.info(
            message,
            duration_seconds=round(time.perf_counter() - start, 3),
            **extra_context,
        )


@contextmanager
def log_operation(
    log_instance,
    operation: str,
    success_msg: str = "Operation completed",
    error_msg: str = "Operation failed",
    **extra_context,
):
    """
    Log start, success or failure of ``operation``.

    Failures are logged with the traceback and re-raised.
    """
    log_instance.info(f"Starting: {operation}", **extra_context)
    start = time.perf_counter()
    try:
        yield
    except Exception as e:
        log_instance.opt(exception=True).error(
            error_msg,
            operation=operation,
            duration_seconds=round(time.perf_counter() - start, 3),
            error=str(e),
            error_type=type(e).__name__,
            **extra_context,
        )
        raise
    log_instance.info(
        success_msg,
        operation=operation,
        duration_seconds=round(time.perf_counter() - start, 3),
        **extra_context,
    )


class LogProgress:
    """
    Periodic progress lines while a stream is consumed.

    Example:
        progress = LogProgress(log, total=len(stream), operation="stream", log_every=1000)
        for batch in stream.batches:
            ...
            progress.update(len(batch), buffer_size=len(memory))
        progress.complete()
    """

    def __init__(self, log_instance, total: int, operation: str, log_every: int = 1000, **extra_context):
        self.log = log_instance
        self.total = total
        self.operation = operation
        self.log_every = max(1, log_every)
        self.extra_context = extra_context
        self.count = 0
        self._next_report = self.log_every
        self.start_time = time.perf_counter()

    def _rate(self) -> tuple[float, float]:
        elapsed = time.perf_counter() - self.start_time
        return elapsed, (self.count / elapsed if elapsed > 0 else 0.0)

    def update(self, n: int = 1, **latest) -> None:
        """Advance by ``n`` examples; ``latest`` values ride along on the progress line."""
        self.count += n
        if self.count < self._next_report and self.count != self.total:
            return
        while self._next_report <= self.count:
            self._next_report += self.log_every
        elapsed, rate = self._rate()
        self.log.info(
            f"Progress: {self.operation}",
            examples_seen=self.count,
            total=self.total,
            percent=round(100 * self.count / self.total, 1) if self.total else 0.0,
            examples_per_sec=round(rate, 1),
            elapsed_seconds=round(elapsed, 1),
            **latest,
            **self.extra_context,
        )

    def complete(self) -> None:
        elapsed, rate = self._rate()
        self.log.info(
            f"Completed: {self.operation}",
            examples_seen=self.count,
            duration_seconds=round(elapsed, 1),
            examples_per_sec=round(rate, 1),
            **self.extra_context,
        )


configure_logging()
