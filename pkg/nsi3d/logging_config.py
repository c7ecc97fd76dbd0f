"""Centralized logging configuration for nsi3d.

Records carry the scenario run id and the pipeline stage that emitted them,
so the log of a multi-aperture run can be split per scenario and per stage.
"""

import logging
import os
import sys

from pythonjsonlogger.json import JsonFormatter

TEXT_FORMAT = (
    "%(asctime)s - %(name)s - %(levelname)s - %(message)s [run:%(run_id)s stage:%(stage)s]"
)
JSON_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s %(run_id)s %(stage)s"

# Third-party loggers that are chatty at DEBUG while rasters are written.
QUIET_LOGGERS = ("PIL",)


class RunIdFilter(logging.Filter):
    """Add the scenario run id and current stage to all log records.

    A `stage` passed through `extra=` wins over the context value.
    """

    def filter(self, record: logging.LogRecord) -> bool:
        from nsi3d.context import get_run_id, get_stage

        record.run_id = get_run_id() or "-"
        if not getattr(record, "stage", None):
            record.stage = get_stage() or "-"
        return True


def _fill_context(record: logging.LogRecord) -> None:
    for name in ("run_id", "stage"):
        if not hasattr(record, name):
            setattr(record, name, "-")


class _TextFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        _fill_context(record)
        return super().format(record)


class _JsonFormatter(JsonFormatter):
    def format(self, record: logging.LogRecord) -> str:
        _fill_context(record)
        return super().format(record)


def _log_format() -> str:
    return (os.getenv("NSI3D_LOG_FORMAT") or os.getenv("LOG_FORMAT") or "text").lower()


def configure_logging() -> None:
    """Configure logging from NSI3D_LOG_FORMAT (or LOG_FORMAT) and NSI3D_LOG_LEVEL."""
    use_json = _log_format() == "json"
    level = getattr(logging, os.getenv("NSI3D_LOG_LEVEL", "INFO").upper(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    if use_json:
        formatter: logging.Formatter = _JsonFormatter(JSON_FORMAT, datefmt="%Y-%m-%dT%H:%M:%S")
    else:
        formatter = _TextFormatter(TEXT_FORMAT)

    # Stamp run_id on records from any logger that propagates to root,
    # numpy/scipy warnings routed through logging included.
    if root_logger.handlers:
        for handler in root_logger.handlers:
            if not any(isinstance(f, RunIdFilter) for f in handler.filters):
                handler.addFilter(RunIdFilter())
            if not handler.formatter:
                handler.setFormatter(formatter)
    else:
        # stderr keeps stdout free for the tables the CLI prints
        handler = logging.StreamHandler(sys.stderr)
        handler.addFilter(RunIdFilter())
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)

    logging.getLogger("nsi3d").setLevel(level)
    logging.getLogger("nsi3d.audit").setLevel(logging.INFO)
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(max(level, logging.WARNING))
    logging.captureWarnings(True)


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance with the run id filter."""
    logger = logging.getLogger(name)
    if not any(isinstance(f, RunIdFilter) for f in logger.filters):
        logger.addFilter(RunIdFilter())
    return logger
