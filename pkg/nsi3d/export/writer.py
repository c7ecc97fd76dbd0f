"""Artifact writer bound to one output directory and configuration."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from nsi3d.audit import ArtifactEvent, log_artifact
from nsi3d.export import csv_tables, raster, volume_dump
from nsi3d.logging_config import get_logger
from nsi3d.models.acquisition import RfDataset
from nsi3d.models.geometry import ArrayGeometry
from nsi3d.models.volume import EnvelopeVolume
from nsi3d.schemas.experiment import ExperimentConfig, config_hash, dump_config

logger = get_logger("nsi3d.export")


class ArtifactWriter:
    """Writes tables, rasters and dumps under `output_dir`, one audit record each."""

    def __init__(self, output_dir: Path, config: ExperimentConfig) -> None:
        self.output_dir = Path(output_dir)
        self.config = config
        self.config_hash = config_hash(config)
        self.seed = config.seed
        self.written: list[Path] = []

    def _record(self, event: ArtifactEvent, path: Path, **extra) -> Path:
        self.written.append(path)
        log_artifact(event, path, self.config_hash, **extra)
        return path

    def table(
        self,
        name: str,
        header: Sequence[str],
        rows: Iterable[Sequence[object]],
        event: ArtifactEvent = ArtifactEvent.METRICS_EXPORTED,
    ) -> Path:
        rows = list(rows)
        path = csv_tables.write_table(
            self.output_dir / name, header, rows, self.config_hash, self.seed
        )
        return self._record(event, path, rows=len(rows))

    def weight_map(self, name: str, weights: np.ndarray, geom: ArrayGeometry) -> Path:
        path = raster.write_weight_map(self.output_dir / name, weights, geom)
        return self._record(ArtifactEvent.APODIZATION_EXPORTED, path)

    def db_image(
        self,
        name: str,
        db_image: np.ndarray,
        dynamic_range_db: float,
        event: ArtifactEvent = ArtifactEvent.SLICE_RENDERED,
    ) -> Path:
        path = raster.write_db_image(self.output_dir / name, db_image, dynamic_range_db)
        return self._record(event, path, shape=list(db_image.shape))

    def volume(self, name: str, volume: EnvelopeVolume, dynamic_range_db: float) -> Path:
        _, header = volume_dump.write_volume(
            self.output_dir / name, volume, dynamic_range_db, self.config_hash
        )
        return self._record(ArtifactEvent.VOLUME_DUMPED, header, label=volume.label_name)

    def rf(self, name: str, dataset: RfDataset) -> Path:
        header = volume_dump.write_rf(self.output_dir / name, dataset, self.config_hash)
        return self._record(ArtifactEvent.RF_DUMPED, header, n_events=dataset.n_events)

    def config_file(self, name: str = "config.json") -> Path:
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_config(self.config), encoding="utf-8")
        return self._record(ArtifactEvent.CONFIG_WRITTEN, path)
