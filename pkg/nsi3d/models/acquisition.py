"""Phantoms, transmit pulses and simulated RF channel data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nsi3d.models.sequence import AcquisitionPlan, TxEvent


@dataclass(frozen=True, eq=False)
class Phantom:
    """Point scatterers with linear amplitudes.

    `positions` has shape (n, 3) in metres; `amplitudes` shape (n,).
    """

    positions: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)
    rng_seed: int | None = None
    description: str = ""

    @property
    def n_scatterers(self) -> int:
        return int(self.amplitudes.shape[0])

    def scaled(self, factor: float) -> "Phantom":
        return Phantom(self.positions, self.amplitudes * factor, self.rng_seed, self.description)

    def merged(self, other: "Phantom") -> "Phantom":
        """Scatterers of both phantoms, self first."""
        return Phantom(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.amplitudes, other.amplitudes]),
            self.rng_seed,
            self.description,
        )


@dataclass(frozen=True)
class Pulse:
    """Gaussian-envelope transmit pulse.

    `fractional_bandwidth` is the -6 dB spectral width over the centre
    frequency. Traces are rendered on a grid `oversample` times finer than
    `sampling_rate` before decimation.
    """

    center_frequency: float = 3.0e6
    fractional_bandwidth: float = 0.70
    sampling_rate: float = 12e6
    oversample: int = 4
    cutoff_db: float = -60.0

    @property
    def fine_rate(self) -> float:
        return self.sampling_rate * self.oversample


@dataclass(frozen=True, eq=False)
class RfEvent:
    """Received channel traces of one event.

    `traces` are unit-gain (channels x samples), rows ordered like
    `event.rx_elements`; the recorded signal is `tx_gain * traces`.
    """

    event: TxEvent
    traces: np.ndarray = field(repr=False)
    tx_gain: float = 1.0
    t0: float = 0.0

    @property
    def data(self) -> np.ndarray:
        return self.tx_gain * self.traces

    @property
    def n_channels(self) -> int:
        return int(self.traces.shape[0])


@dataclass(frozen=True, eq=False)
class RfDataset:
    """RF data of one compounded volume, one entry per plan event."""

    plan: AcquisitionPlan
    events: tuple[RfEvent, ...]
    sampling_rate: float
    n_samples: int

    @property
    def n_events(self) -> int:
        return len(self.events)

    def scaled(self, factor: float) -> "RfDataset":
        return RfDataset(
            self.plan,
            tuple(
                RfEvent(e.event, e.traces * factor, e.tx_gain, e.t0) for e in self.events
            ),
            self.sampling_rate,
            self.n_samples,
        )
