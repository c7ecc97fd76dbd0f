"""Raw float32 dumps of volumes and RF data with JSON headers."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from nsi3d.exceptions import ConfigurationError
from nsi3d.models.acquisition import RfDataset
from nsi3d.models.volume import EnvelopeVolume, VolumeLabel, VoxelGrid

DTYPE = "<f4"


def write_volume(
    stem: Path,
    volume: EnvelopeVolume,
    dynamic_range_db: float,
    config_hash: str | None = None,
) -> tuple[Path, Path]:
    """Write `<stem>.raw` (z fastest) and `<stem>.json`."""
    stem.parent.mkdir(parents=True, exist_ok=True)
    raw = stem.with_suffix(".raw")
    header = stem.with_suffix(".json")
    np.ascontiguousarray(volume.values, dtype=DTYPE).tofile(raw)
    grid = volume.grid
    meta: dict[str, Any] = {
        "label": volume.label_name,
        "dims": list(grid.dims),
        "spacing": list(grid.spacing),
        "origin": list(grid.origin),
        "dtype": DTYPE,
        "order": "z-fastest",
        "axes": ["x", "y", "z"],
        "dynamic_range_db": dynamic_range_db,
        "data_file": raw.name,
        "config_hash": config_hash,
    }
    header.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return raw, header


def read_volume(header_path: Path) -> tuple[EnvelopeVolume, dict[str, Any]]:
    """Volume and header written by `write_volume`."""
    try:
        meta = json.loads(header_path.read_text(encoding="utf-8"))
        grid = VoxelGrid(
            origin=tuple(meta["origin"]),
            spacing=tuple(meta["spacing"]),
            dims=tuple(int(n) for n in meta["dims"]),
        )
        values = np.fromfile(header_path.parent / meta["data_file"], dtype=meta["dtype"])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigurationError(
            f"unreadable volume dump: {exc}", field="volume", value=str(header_path)
        ) from exc
    if values.size != grid.n_voxels:
        raise ConfigurationError(
            f"volume holds {values.size} values, header says {grid.n_voxels}",
            field="volume",
            value=str(header_path),
        )
    label = meta.get("label", "")
    try:
        label = VolumeLabel(label)
    except ValueError:
        pass
    volume = EnvelopeVolume(grid=grid, values=values.astype(float).reshape(grid.dims), label=label)
    return volume, meta


def write_rf(directory: Path, dataset: RfDataset, config_hash: str | None = None) -> Path:
    """One `event_NNN.raw` (channels x samples, samples fastest) per event plus `rf.json`."""
    directory.mkdir(parents=True, exist_ok=True)
    events = []
    for rf in dataset.events:
        name = f"event_{rf.event.event_index:03d}.raw"
        np.ascontiguousarray(rf.data, dtype=DTYPE).tofile(directory / name)
        events.append(
            {
                "event_index": rf.event.event_index,
                "angle_index": rf.event.angle_index,
                "source_position": list(rf.event.source.position),
                "tx_bank": rf.event.tx_bank,
                "rx_bank": rf.event.rx_bank,
                "t0": rf.t0,
                "tx_gain": rf.tx_gain,
                "channels": list(rf.event.rx_elements),
                "data_file": name,
            }
        )
    header = directory / "rf.json"
    meta = {
        "sampling_rate": dataset.sampling_rate,
        "n_samples": dataset.n_samples,
        "dtype": DTYPE,
        "layout": "channels x samples",
        "config_hash": config_hash,
        "events": events,
    }
    header.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return header
