"""Virtual-source grid, multiplexed TX/RX event plans and volume-rate accounting."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import replace

import numpy as np

from nsi3d.exceptions import SequenceError
from nsi3d.imaging.array_geometry import channel_conflicts
from nsi3d.logging_config import get_logger
from nsi3d.models.aperture import ApertureKind, ApertureMask
from nsi3d.models.geometry import ArrayGeometry
from nsi3d.models.sequence import AcquisitionPlan, TxEvent, VirtualSource

logger = get_logger("nsi3d.imaging.tx_sequence")

STANDOFF = 17.4e-3
TILT_DEG = 5.0
IMAGING_DEPTH = 70e-3
BYTES_PER_SAMPLE = 2
RF_SAMPLING_RATE = 12e6

# (azimuth, elevation) in units of the tilt step, straight-ahead first
_TILT_GRID = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def source_direction(azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    """Unit steering vector: azimuth rotates about y, elevation about x."""
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return np.array([math.sin(az) * math.cos(el), math.sin(el), math.cos(az) * math.cos(el)])


def virtual_sources(
    standoff: float = STANDOFF, tilt: float = TILT_DEG
) -> tuple[VirtualSource, ...]:
    """Nine virtual sources on a 3x3 tilt grid, `standoff` behind the array centre."""
    if standoff <= 0:
        raise SequenceError(f"standoff must be positive, got {standoff!r}")
    sources = []
    for index, (a, e) in enumerate(_TILT_GRID):
        direction = source_direction(a * tilt, e * tilt)
        position = -standoff * direction
        sources.append(
            VirtualSource(
                angle_index=index,
                azimuth_tilt=a * tilt,
                elevation_tilt=e * tilt,
                position=(float(position[0]), float(position[1]), float(position[2])),
                standoff=standoff,
            )
        )
    return tuple(sources)


def _bank_split(geom: ArrayGeometry, aperture: ApertureMask) -> list[tuple[int, tuple[int, ...]]]:
    ids = aperture.ids_array()
    banks = geom.banks[ids]
    return [
        (bank, tuple(ids[banks == bank].tolist()))
        for bank in range(geom.n_banks)
        if np.any(banks == bank)
    ]


def build_plan(
    aperture: ApertureMask,
    geom: ArrayGeometry,
    sources: Sequence[VirtualSource] | None = None,
) -> AcquisitionPlan:
    """Expand an aperture into the ordered events of one compounded volume.

    Multiplexed apertures visit every (tx bank, rx bank) pair per angle, tx
    bank in the outer loop; a spiral no-reuse aperture fires and receives on
    the whole mask in a single event per angle.
    """
    sources = tuple(sources) if sources is not None else virtual_sources()
    if aperture.n_elements == 0:
        raise SequenceError("aperture has no elements")
    if max(aperture.element_ids) >= geom.n_elements:
        raise SequenceError("aperture refers to elements outside the geometry")

    events: list[TxEvent] = []
    if aperture.kind is ApertureKind.SPIRAL_NO_REUSE:
        conflicts = channel_conflicts(geom, aperture.element_ids)
        if conflicts:
            raise SequenceError(
                f"single-event operation requested but {len(conflicts)} channels are shared "
                f"(first: channel {conflicts[0][0]})"
            )
        for source in sources:
            events.append(
                TxEvent(
                    event_index=len(events),
                    angle_index=source.angle_index,
                    source=source,
                    tx_elements=aperture.element_ids,
                    rx_elements=aperture.element_ids,
                )
            )
        events_per_angle = 1
    else:
        banks = _bank_split(geom, aperture)
        for source in sources:
            for tx_bank, tx_ids in banks:
                for rx_bank, rx_ids in banks:
                    events.append(
                        TxEvent(
                            event_index=len(events),
                            angle_index=source.angle_index,
                            source=source,
                            tx_elements=tx_ids,
                            rx_elements=rx_ids,
                            tx_bank=tx_bank,
                            rx_bank=rx_bank,
                        )
                    )
        events_per_angle = len(banks) ** 2

    plan = AcquisitionPlan(
        aperture=aperture,
        sources=sources,
        events=tuple(events),
        events_per_angle=events_per_angle,
    )
    logger.info(
        "Acquisition plan built",
        extra={
            "aperture": aperture.kind.value,
            "n_events": plan.n_events,
            "events_per_angle": events_per_angle,
            "n_angles": plan.n_angles,
        },
    )
    return plan


def samples_per_event(depth: float, c: float, sampling_rate: float = RF_SAMPLING_RATE) -> int:
    """Samples needed to cover the round trip to `depth`."""
    return int(math.ceil(2.0 * depth / c * sampling_rate))


def volume_rate(plan: AcquisitionPlan, depth: float = IMAGING_DEPTH, c: float = 1540.0) -> float:
    """Maximum volumes per second when every event waits for the echo from `depth`."""
    if depth <= 0 or c <= 0:
        raise SequenceError(f"depth and sound speed must be positive (depth={depth}, c={c})")
    if plan.n_events == 0:
        raise SequenceError("plan has no events")
    return 1.0 / (plan.n_events * 2.0 * depth / c)


def rf_bytes_per_volume(
    plan: AcquisitionPlan,
    depth: float = IMAGING_DEPTH,
    c: float = 1540.0,
    sampling_rate: float = RF_SAMPLING_RATE,
    bytes_per_sample: int = BYTES_PER_SAMPLE,
) -> int:
    n_samples = samples_per_event(depth, c, sampling_rate)
    n_channels = sum(len(event.rx_elements) for event in plan.events)
    return n_channels * n_samples * bytes_per_sample


def with_accounting(
    plan: AcquisitionPlan,
    depth: float = IMAGING_DEPTH,
    c: float = 1540.0,
    sampling_rate: float = RF_SAMPLING_RATE,
    bytes_per_sample: int = BYTES_PER_SAMPLE,
) -> AcquisitionPlan:
    """Copy of `plan` with the volume rate and RF data size filled in."""
    return replace(
        plan,
        max_volume_rate=volume_rate(plan, depth, c),
        rf_bytes_per_volume=rf_bytes_per_volume(plan, depth, c, sampling_rate, bytes_per_sample),
        depth=depth,
    )


def transmit_delay(points: np.ndarray, source: VirtualSource, sound_speed: float) -> np.ndarray:
    """Diverging-wave arrival time, zero where the wavefront crosses the array centre."""
    position = np.asarray(source.position)
    return (np.linalg.norm(points - position, axis=-1) - source.standoff) / sound_speed
