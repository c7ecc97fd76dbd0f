"""Context management for run-scoped values: the scenario run id and the current stage."""

from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar

run_id_var: ContextVar[str] = ContextVar("run_id", default="")
stage_var: ContextVar[str] = ContextVar("stage", default="")


def get_run_id() -> str:
    """Get the current run id from context."""
    return run_id_var.get("")


def set_run_id(run_id: str) -> None:
    """Set the run id in context."""
    run_id_var.set(run_id)


def make_run_id(scenario: str, config_hash: str) -> str:
    """Build the run id used to tag every log record of one scenario."""
    return f"{scenario}-{config_hash[:12]}"


def get_stage() -> str:
    return stage_var.get("")


@contextmanager
def current_stage(name: str) -> Iterator[None]:
    """Tag log records emitted inside the block with a pipeline stage name."""
    token = stage_var.set(name)
    try:
        yield
    finally:
        stage_var.reset(token)
