"""Diverging-wave RF synthesis for point, speckle and cyst phantoms.

Each scatterer contributes a delayed, spherically spread copy of the pulse
to every receive channel. Contributions are deposited on an oversampled
time grid, convolved with the sampled pulse and decimated.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve, gausspulse

from nsi3d.exceptions import SimulationError
from nsi3d.imaging.beampattern import estimate_resolution_cell
from nsi3d.imaging.tx_sequence import IMAGING_DEPTH, samples_per_event
from nsi3d.logging_config import get_logger
from nsi3d.models.acquisition import Phantom, Pulse, RfDataset, RfEvent
from nsi3d.models.aperture import ApertureMask
from nsi3d.models.geometry import ArrayGeometry
from nsi3d.models.sequence import AcquisitionPlan, TxEvent

logger = get_logger("nsi3d.imaging.forward_sim")

POINT_DEPTHS = (20e-3, 30e-3, 40e-3, 50e-3, 60e-3)
CYST_BOX = (40e-3, 40e-3, 30e-3)
CYST_CENTER = (0.0, 0.0, 40e-3)
CYST_DIAMETER = 10e-3
SCATTERERS_PER_CELL = 20.0
INSIDE_AMPLITUDE_RATIO = 0.2
DEFAULT_BATCH = 4096


@lru_cache(maxsize=8)
def _pulse_kernel(center_frequency: float, bandwidth: float, rate: float, cutoff_db: float):
    t_cut = gausspulse("cutoff", fc=center_frequency, bw=bandwidth, bwr=-6, tpr=cutoff_db)
    half = int(math.ceil(t_cut * rate))
    t = np.arange(-half, half + 1) / rate
    kernel = gausspulse(t, fc=center_frequency, bw=bandwidth, bwr=-6)
    kernel.setflags(write=False)
    return t, kernel


def pulse_waveform(pulse: Pulse, rate: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pulse samples centred on t = 0, truncated at `pulse.cutoff_db`."""
    return _pulse_kernel(
        pulse.center_frequency,
        pulse.fractional_bandwidth,
        rate or pulse.fine_rate,
        pulse.cutoff_db,
    )


def make_point_phantom(depths: Sequence[float] = POINT_DEPTHS) -> Phantom:
    """Unit-amplitude scatterers on the z axis."""
    depths = np.asarray(list(depths), dtype=float)
    if np.any(depths <= 0):
        raise SimulationError("point depths must be positive")
    positions = np.column_stack((np.zeros(depths.size), np.zeros(depths.size), depths))
    return Phantom(
        positions=positions,
        amplitudes=np.ones(depths.size),
        description=f"{depths.size} on-axis points",
    )


def make_cyst_phantom(
    cell_volume: float,
    box: tuple[float, float, float] = CYST_BOX,
    box_center: tuple[float, float, float] = CYST_CENTER,
    cyst_center: tuple[float, float, float] = CYST_CENTER,
    cyst_diameter: float = CYST_DIAMETER,
    density: float = SCATTERERS_PER_CELL,
    inside_amp_ratio: float = INSIDE_AMPLITUDE_RATIO,
    seed: int = 0,
) -> Phantom:
    """Speckle box with a spherical low-echo region.

    Scatterer count is `density * box volume / cell_volume`; amplitudes are
    standard normal, scaled by `inside_amp_ratio` inside the sphere.
    """
    if density <= 0:
        raise SimulationError(f"scatterer density must be positive, got {density!r}")
    if cell_volume <= 0:
        raise SimulationError(f"resolution cell volume must be positive, got {cell_volume!r}")
    box_arr = np.asarray(box, dtype=float)
    center = np.asarray(box_center, dtype=float)
    if np.any(box_arr <= 0):
        raise SimulationError(f"phantom box must have positive size, got {box!r}")
    if center[2] - 0.5 * box_arr[2] <= 0:
        raise SimulationError("phantom box extends behind the array")

    box_volume = float(np.prod(box_arr))
    n = int(round(density * box_volume / cell_volume))
    rng = np.random.default_rng(seed)
    positions = center + (rng.random((n, 3)) - 0.5) * box_arr
    amplitudes = rng.standard_normal(n)
    inside = np.linalg.norm(positions - np.asarray(cyst_center), axis=1) <= 0.5 * cyst_diameter
    amplitudes[inside] *= inside_amp_ratio

    logger.info(
        "Cyst phantom generated",
        extra={
            "n_scatterers": n,
            "box_volume_mm3": box_volume * 1e9,
            "cell_volume_mm3": cell_volume * 1e9,
            "cells": box_volume / cell_volume,
            "density": density,
            "n_inside": int(inside.sum()),
            "seed": seed,
        },
    )
    return Phantom(positions, amplitudes, rng_seed=seed, description="cyst")


def make_default_cyst_phantom(
    mask: ApertureMask,
    geom: ArrayGeometry,
    pulse: Pulse,
    seed: int = 0,
    **kwargs,
) -> Phantom:
    """Cyst phantom sized from the aperture's resolution cell at the cyst depth."""
    depth = kwargs.get("cyst_center", CYST_CENTER)[2]
    cell = estimate_resolution_cell(mask, geom, pulse, depth)
    logger.info(
        "Resolution cell estimated",
        extra={
            "axial_mm": cell.axial * 1e3,
            "azimuth_mm": cell.azimuth * 1e3,
            "elevation_mm": cell.elevation * 1e3,
        },
    )
    return make_cyst_phantom(cell.volume, seed=seed, **kwargs)


def _validate_phantom(phantom: Phantom) -> None:
    if phantom.n_scatterers == 0:
        return
    if not np.all(np.isfinite(phantom.positions)) or not np.all(np.isfinite(phantom.amplitudes)):
        raise SimulationError("phantom positions and amplitudes must be finite")
    if np.any(phantom.positions[:, 2] <= 0):
        raise SimulationError("scatterer behind the array (z <= 0)")


def simulate_rf(
    event: TxEvent,
    phantom: Phantom,
    geom: ArrayGeometry,
    pulse: Pulse,
    n_samples: int | None = None,
    t0: float = 0.0,
    noise_std: float = 0.0,
    noise_seed: int | None = None,
    batch: int = DEFAULT_BATCH,
) -> np.ndarray:
    """Unit-gain traces (rx channels x samples) for one event.

    Rows follow `event.rx_elements`. Sample j is at time t0 + j / sampling_rate.
    """
    _validate_phantom(phantom)
    if n_samples is None:
        n_samples = samples_per_event(IMAGING_DEPTH, geom.sound_speed, pulse.sampling_rate)
    rx = np.asarray(event.rx_elements, dtype=np.int64)
    if rx.size and (rx.min() < 0 or rx.max() >= geom.n_elements):
        raise SimulationError("event refers to elements outside the geometry")

    c = geom.sound_speed
    _, kernel = pulse_waveform(pulse)
    half = (kernel.size - 1) // 2
    os_ = pulse.oversample
    fine_rate = pulse.fine_rate
    # fine bin b sits at t0 + (b - half) / fine_rate
    n_fine = n_samples * os_ + 2 * half
    deposits = np.zeros(rx.size * n_fine)

    rx_pos = geom.positions[rx]
    source = np.asarray(event.source.position)
    row_offset = (np.arange(rx.size) * n_fine)[:, None]
    for start in range(0, phantom.n_scatterers, batch):
        pos = phantom.positions[start : start + batch]
        amp = phantom.amplitudes[start : start + batch]
        r_tx = np.linalg.norm(pos - source, axis=1)
        r_rx = np.linalg.norm(pos[None, :, :] - rx_pos[:, None, :], axis=2)
        tau = (r_tx - event.source.standoff)[None, :] / c + r_rx / c
        weight = amp[None, :] / (r_tx[None, :] * r_rx)

        f = (tau - t0) * fine_rate + half
        b = np.floor(f).astype(np.int64)
        frac = f - b
        ok = (b >= 0) & (b < n_fine - 1)
        flat = (row_offset + b)[ok]
        w = weight[ok]
        fr = frac[ok]
        deposits += np.bincount(flat, weights=w * (1.0 - fr), minlength=deposits.size)
        deposits += np.bincount(flat + 1, weights=w * fr, minlength=deposits.size)

    fine = fftconvolve(deposits.reshape(rx.size, n_fine), kernel[None, :], mode="full", axes=1)
    traces = fine[:, 2 * half : 2 * half + n_samples * os_ : os_]
    if noise_std > 0:
        rng = np.random.default_rng(noise_seed)
        traces = traces + rng.normal(0.0, noise_std, traces.shape)
    return np.ascontiguousarray(traces)


def transmit_gain(event: TxEvent, plan: AcquisitionPlan) -> float:
    """Fraction of the aperture that fires in this event."""
    return len(event.tx_elements) / plan.aperture.n_elements


def simulate_acquisition(
    plan: AcquisitionPlan,
    phantom: Phantom,
    geom: ArrayGeometry,
    pulse: Pulse,
    n_samples: int | None = None,
    workers: int = 1,
    noise_std: float = 0.0,
    batch: int = DEFAULT_BATCH,
) -> RfDataset:
    """RF data for every event of the plan.

    Events sharing a virtual source and receive set share their unit traces;
    each event scales them by its transmit gain.
    """
    _validate_phantom(phantom)
    if n_samples is None:
        depth = plan.depth or IMAGING_DEPTH
        n_samples = samples_per_event(depth, geom.sound_speed, pulse.sampling_rate)

    unique: dict[tuple[int, tuple[int, ...]], TxEvent] = {}
    for event in plan.events:
        unique.setdefault((event.angle_index, event.rx_elements), event)
    keys = list(unique)

    def _run(key: tuple[int, tuple[int, ...]]) -> np.ndarray:
        event = unique[key]
        seed = None
        if noise_std > 0:
            seed = (phantom.rng_seed or 0) * 1000 + event.event_index
        return simulate_rf(
            event, phantom, geom, pulse, n_samples,
            noise_std=noise_std, noise_seed=seed, batch=batch,
        )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        traces = dict(zip(keys, pool.map(_run, keys)))

    events = tuple(
        RfEvent(
            event=event,
            traces=traces[(event.angle_index, event.rx_elements)],
            tx_gain=transmit_gain(event, plan),
            t0=0.0,
        )
        for event in plan.events
    )
    logger.info(
        "Acquisition simulated",
        extra={
            "aperture": plan.aperture.kind.value,
            "n_events": len(events),
            "unique_receptions": len(keys),
            "n_scatterers": phantom.n_scatterers,
            "n_samples": n_samples,
        },
    )
    return RfDataset(
        plan=plan, events=events, sampling_rate=pulse.sampling_rate, n_samples=n_samples
    )
