"""Diverging-wave transmit sequence model."""

from __future__ import annotations

from dataclasses import dataclass

from nsi3d.models.aperture import ApertureMask


@dataclass(frozen=True)
class VirtualSource:
    """Point behind the array from which a diverging wave appears to emanate."""

    angle_index: int
    azimuth_tilt: float
    elevation_tilt: float
    position: tuple[float, float, float]
    standoff: float


@dataclass(frozen=True)
class TxEvent:
    """One transmit-receive event.

    `tx_bank`/`rx_bank` are None when the whole aperture fires at once.
    """

    event_index: int
    angle_index: int
    source: VirtualSource
    tx_elements: tuple[int, ...]
    rx_elements: tuple[int, ...]
    tx_bank: int | None = None
    rx_bank: int | None = None


@dataclass(frozen=True)
class AcquisitionPlan:
    """Ordered events of one compounded volume."""

    aperture: ApertureMask
    sources: tuple[VirtualSource, ...]
    events: tuple[TxEvent, ...]
    events_per_angle: int
    rf_bytes_per_volume: int | None = None
    max_volume_rate: float | None = None
    depth: float | None = None

    @property
    def n_angles(self) -> int:
        return len(self.sources)

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def multiplexed(self) -> bool:
        return self.events_per_angle > 1
