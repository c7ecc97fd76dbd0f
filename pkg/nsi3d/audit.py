"""Audit logging for written artifacts."""

import logging
from enum import Enum
from pathlib import Path
from typing import Any, Optional

audit_logger = logging.getLogger("nsi3d.audit")


class ArtifactEvent(str, Enum):
    """Artifact event types."""

    GEOMETRY_EXPORTED = "geometry.exported"
    APODIZATION_EXPORTED = "apodization.exported"
    PLAN_EXPORTED = "plan.exported"
    RATES_EXPORTED = "rates.exported"
    RF_DUMPED = "rf.dumped"
    VOLUME_DUMPED = "volume.dumped"
    SLICE_RENDERED = "slice.rendered"
    PATTERN_EXPORTED = "pattern.exported"
    PROFILE_EXPORTED = "profile.exported"
    METRICS_EXPORTED = "metrics.exported"
    BENCH_EXPORTED = "bench.exported"
    CONFIG_WRITTEN = "config.written"


def log_artifact(
    event: ArtifactEvent,
    path: Path | str,
    config_hash: Optional[str] = None,
    **extra: Any,
) -> None:
    """Log an artifact event.

    Args:
        event: The type of artifact written
        path: Where the artifact was written
        config_hash: Hash of the experiment configuration that produced it
        **extra: Additional context
    """
    audit_logger.info(
        f"Artifact: {event.value}",
        extra={
            "artifact_event": event.value,
            "path": str(path),
            "config_hash": config_hash,
            **extra,
        },
    )
