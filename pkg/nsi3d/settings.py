"""Process-level settings."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path


def _default_workers() -> int:
    configured = os.getenv("NSI3D_WORKERS")
    if configured:
        return max(1, int(configured))
    return os.cpu_count() or 1


@dataclass
class RunSettings:
    """Runtime knobs that do not change results, only how they are computed."""

    workers: int = field(default_factory=_default_workers)
    output_dir: Path = field(
        default_factory=lambda: Path(os.getenv("NSI3D_OUTPUT_DIR", "./nsi3d-out"))
    )
    voxel_chunk: int = field(default_factory=lambda: int(os.getenv("NSI3D_VOXEL_CHUNK", "4096")))
    rx_block: int = field(default_factory=lambda: int(os.getenv("NSI3D_RX_BLOCK", "64")))
    scatterer_batch: int = field(
        default_factory=lambda: int(os.getenv("NSI3D_SCATTERER_BATCH", "4096"))
    )
    otlp_endpoint: str | None = field(
        default_factory=lambda: os.getenv("OTEL_EXPORTER_OTLP_ENDPOINT")
    )

    @classmethod
    def from_env(cls) -> "RunSettings":
        return cls()


def get_settings() -> RunSettings:
    return RunSettings.from_env()
