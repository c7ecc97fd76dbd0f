"""Delay-and-sum reconstruction and the NSI envelope combination.

All requested apodizations share one delay pass: analytic channel samples
are interpolated once per voxel chunk and the weights are applied as a
matrix product. Events with the same virtual source and receive element are
summed before delaying.
"""

from __future__ import annotations

from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.signal import hilbert

from nsi3d.exceptions import BeamformError
from nsi3d.imaging.tx_sequence import transmit_delay
from nsi3d.logging_config import get_logger
from nsi3d.models.acquisition import RfDataset
from nsi3d.models.aperture import DC1, DC2, RECT, ZM, ApodizationSet
from nsi3d.models.geometry import ArrayGeometry
from nsi3d.models.sequence import VirtualSource
from nsi3d.models.volume import EnvelopeVolume, VolumeLabel, VoxelGrid

logger = get_logger("nsi3d.imaging.beamform")

DEFAULT_DYNAMIC_RANGE_DB = 50.0


class Compounding(str, Enum):
    COHERENT = "coherent"
    INCOHERENT = "incoherent"


WINDOW_VOLUME_LABELS = {
    RECT: VolumeLabel.DAS,
    ZM: VolumeLabel.ZM,
    DC1: VolumeLabel.DC1,
    DC2: VolumeLabel.DC2,
}


@dataclass(frozen=True, eq=False)
class AngleChannels:
    """Presummed analytic traces of one virtual source."""

    source: VirtualSource
    element_ids: np.ndarray = field(repr=False)
    signals: np.ndarray = field(repr=False)
    t0: float


@dataclass(frozen=True, eq=False)
class AnalyticChannels:
    angles: tuple[AngleChannels, ...]
    sampling_rate: float
    n_samples: int


def prepare_channels(dataset: RfDataset) -> AnalyticChannels:
    """Sum recorded traces per (virtual source, rx element) and take the analytic signal."""
    groups: dict[int, dict[int, np.ndarray]] = {}
    sources: dict[int, VirtualSource] = {}
    t0s: dict[int, float] = {}
    for rf in dataset.events:
        angle = rf.event.angle_index
        if angle in t0s and t0s[angle] != rf.t0:
            raise BeamformError(f"events of angle {angle} start at different times")
        t0s[angle] = rf.t0
        sources[angle] = rf.event.source
        per_element = groups.setdefault(angle, {})
        data = rf.data
        for row, element in enumerate(rf.event.rx_elements):
            if element in per_element:
                per_element[element] = per_element[element] + data[row]
            else:
                per_element[element] = data[row].copy()

    angles = []
    for angle in sorted(groups):
        per_element = groups[angle]
        ids = np.array(sorted(per_element), dtype=np.int64)
        real = np.vstack([per_element[i] for i in ids.tolist()])
        angles.append(
            AngleChannels(
                source=sources[angle],
                element_ids=ids,
                signals=hilbert(real, axis=-1),
                t0=t0s[angle],
            )
        )
    return AnalyticChannels(tuple(angles), dataset.sampling_rate, dataset.n_samples)


def _weight_matrix(
    weights: Mapping[str, np.ndarray], channels: AnalyticChannels, n_elements: int
) -> tuple[list[str], np.ndarray]:
    labels = list(weights)
    rows = []
    for label in labels:
        w = np.asarray(weights[label], dtype=float)
        if w.shape != (n_elements,):
            raise BeamformError(f"weights {label!r} must have one value per element")
        rows.append(w)
    matrix = np.vstack(rows) if rows else np.zeros((0, n_elements))
    for angle in channels.angles:
        missing = np.isnan(matrix[:, angle.element_ids])
        if missing.any():
            row, col = np.argwhere(missing)[0]
            raise BeamformError(
                f"missing weight {labels[row]!r} for receive element "
                f"{int(angle.element_ids[col])}"
            )
    return labels, matrix


def _check_grid(grid: VoxelGrid) -> None:
    if any(s <= 0 for s in grid.spacing) or any(n <= 0 for n in grid.dims):
        raise BeamformError(f"invalid voxel grid {grid}")
    z = grid.z
    if z.min() <= 0:
        raise BeamformError(f"voxel at z = {z.min():.4g} m lies behind the array")


def _chunk_response(
    points: np.ndarray,
    channels: AnalyticChannels,
    positions: np.ndarray,
    matrix: np.ndarray,
    sound_speed: float,
    compound: Compounding,
    rx_block: int,
) -> np.ndarray:
    n_rows = matrix.shape[0]
    n_points = points.shape[0]
    n_samples = channels.n_samples
    coherent = compound is Compounding.COHERENT
    acc = np.zeros((n_rows, n_points), dtype=complex if coherent else float)
    for angle in channels.angles:
        t_tx = transmit_delay(points, angle.source, sound_speed)
        per_angle = np.zeros((n_rows, n_points), dtype=complex)
        for start in range(0, angle.element_ids.size, rx_block):
            ids = angle.element_ids[start : start + rx_block]
            sig = angle.signals[start : start + rx_block]
            r = np.linalg.norm(points[None, :, :] - positions[ids][:, None, :], axis=2)
            f = (t_tx[None, :] + r / sound_speed - angle.t0) * channels.sampling_rate
            i = np.floor(f).astype(np.int64)
            frac = f - i
            valid = (i >= 0) & (i < n_samples - 1)
            i = np.where(valid, i, 0)
            rows = np.arange(ids.size)[:, None]
            samples = sig[rows, i] * (1.0 - frac) + sig[rows, i + 1] * frac
            samples = np.where(valid, samples, 0.0)
            per_angle += matrix[:, ids] @ samples
        if coherent:
            acc += per_angle
        else:
            acc += np.abs(per_angle)
    return acc


def _delay_and_sum(
    channels: AnalyticChannels,
    matrix: np.ndarray,
    geom: ArrayGeometry,
    grid: VoxelGrid,
    compound: Compounding,
    workers: int,
    voxel_chunk: int,
    rx_block: int,
) -> np.ndarray:
    _check_grid(grid)
    points = grid.points()
    chunks = [points[s : s + voxel_chunk] for s in range(0, points.shape[0], voxel_chunk)]

    def _run(chunk: np.ndarray) -> np.ndarray:
        return _chunk_response(
            chunk, channels, geom.positions, matrix, geom.sound_speed, compound, rx_block
        )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(_run, chunks))
    out = np.concatenate(parts, axis=1) if parts else np.zeros((matrix.shape[0], 0))
    return out.reshape((matrix.shape[0], *grid.dims))


def das_volume(
    dataset: RfDataset,
    weights: np.ndarray,
    grid: VoxelGrid,
    geom: ArrayGeometry,
    workers: int = 1,
    voxel_chunk: int = 4096,
    rx_block: int = 64,
) -> np.ndarray:
    """Coherently compounded analytic DAS volume for one per-element weighting."""
    channels = prepare_channels(dataset)
    _, matrix = _weight_matrix({"w": weights}, channels, geom.n_elements)
    return _delay_and_sum(
        channels, matrix, geom, grid, Compounding.COHERENT, workers, voxel_chunk, rx_block
    )[0]


def envelope(
    volume: np.ndarray, grid: VoxelGrid, label: VolumeLabel | str = VolumeLabel.DAS
) -> EnvelopeVolume:
    """Magnitude of an analytic volume."""
    volume = np.asarray(volume)
    if not np.all(np.isfinite(volume)):
        raise BeamformError("volume holds non-finite values")
    if volume.shape != grid.dims:
        raise BeamformError(f"volume shape {volume.shape} does not match grid {grid.dims}")
    return EnvelopeVolume(grid=grid, values=np.abs(volume), label=label)


def beamform_envelopes(
    dataset: RfDataset | AnalyticChannels,
    weights: Mapping[str, np.ndarray],
    grid: VoxelGrid,
    geom: ArrayGeometry,
    compound: Compounding | str = Compounding.COHERENT,
    workers: int = 1,
    voxel_chunk: int = 4096,
    rx_block: int = 64,
) -> dict[str, EnvelopeVolume]:
    """Envelope volumes for several weightings in one delay pass, keyed like `weights`.

    Coherent compounding sums analytic signals over all events before the
    magnitude; incoherent compounding sums per-angle magnitudes.
    """
    compound = Compounding(compound)
    channels = dataset if isinstance(dataset, AnalyticChannels) else prepare_channels(dataset)
    labels, matrix = _weight_matrix(weights, channels, geom.n_elements)
    result = _delay_and_sum(
        channels, matrix, geom, grid, compound, workers, voxel_chunk, rx_block
    )
    volumes = {}
    for row, label in enumerate(labels):
        values = np.abs(result[row])
        volumes[label] = EnvelopeVolume(
            grid=grid, values=values, label=WINDOW_VOLUME_LABELS.get(label, label)
        )
    logger.debug(
        "Beamformed",
        extra={
            "n_voxels": grid.n_voxels,
            "windows": labels,
            "compound": compound.value,
            "n_angles": len(channels.angles),
        },
    )
    return volumes


def nsi_combine(
    e_zm: EnvelopeVolume, e_dc1: EnvelopeVolume, e_dc2: EnvelopeVolume, dc: float
) -> EnvelopeVolume:
    """E_NSI = max((E_DC1 + E_DC2)/2 - E_ZM, 0) / (2 dc), voxelwise."""
    if dc <= 0:
        raise BeamformError(f"dc offset must be positive, got {dc!r}")
    if not (e_zm.grid == e_dc1.grid == e_dc2.grid) or not (
        e_zm.values.shape == e_dc1.values.shape == e_dc2.values.shape
    ):
        raise BeamformError("NSI inputs are on different grids")
    raw = 0.5 * (e_dc1.values + e_dc2.values) - e_zm.values
    return EnvelopeVolume(
        grid=e_zm.grid, values=np.maximum(raw, 0.0) / (2.0 * dc), label=VolumeLabel.NSI
    )


def reconstruct(
    dataset: RfDataset | AnalyticChannels,
    apod: ApodizationSet,
    grid: VoxelGrid,
    geom: ArrayGeometry,
    compound: Compounding | str = Compounding.COHERENT,
    include_das: bool = True,
    workers: int = 1,
    voxel_chunk: int = 4096,
    rx_block: int = 64,
) -> dict[VolumeLabel, EnvelopeVolume]:
    """E_DAS (rect window), E_ZM, E_DC1, E_DC2 and E_NSI of one dataset."""
    labels = (RECT, ZM, DC1, DC2) if include_das else (ZM, DC1, DC2)
    weights = apod.element_weights(geom.n_elements, labels)
    envs = beamform_envelopes(
        dataset, weights, grid, geom, compound, workers, voxel_chunk, rx_block
    )
    out = {WINDOW_VOLUME_LABELS[label]: envs[label] for label in labels}
    out[VolumeLabel.NSI] = nsi_combine(envs[ZM], envs[DC1], envs[DC2], apod.dc)
    return out


def log_compress(
    env: EnvelopeVolume | np.ndarray, dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB
) -> np.ndarray:
    """20 log10(env / max), floored at -dynamic_range_db."""
    values = np.asarray(env.values if isinstance(env, EnvelopeVolume) else env, dtype=float)
    if dynamic_range_db <= 0:
        raise BeamformError(f"dynamic range must be positive, got {dynamic_range_db!r}")
    peak = values.max() if values.size else 0.0
    if not peak > 0:
        raise BeamformError("cannot log-compress an all-zero envelope")
    eps = 10.0 ** (-dynamic_range_db / 20.0 - 1.0)
    db = 20.0 * np.log10(np.maximum(values / peak, eps))
    return np.maximum(db, -dynamic_range_db)
