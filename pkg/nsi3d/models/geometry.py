"""Matrix array geometry model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Element:
    """One addressable transducer element.

    `active_row` counts element rows only (blank wiring rows skipped);
    `physical_row` is the 1-based row on the physical grid. `radial_distance`
    is measured on the logical 32x32 element grid.
    """

    element_id: int
    col: int
    active_row: int
    physical_row: int
    position: tuple[float, float, float]
    bank: int
    channel: int
    radial_distance: float


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element layout and multiplexer structure of a gridded matrix probe."""

    pitch: float
    n_cols: int
    n_rows_physical: int
    blank_rows: tuple[int, ...]
    bank_rows: int
    center_frequency: float
    fractional_bandwidth: float
    sound_speed: float
    elements: tuple[Element, ...] = field(repr=False)
    positions: np.ndarray = field(repr=False)
    logical_xy: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    active_rows: np.ndarray = field(repr=False)
    banks: np.ndarray = field(repr=False)
    channels: np.ndarray = field(repr=False)
    radial_distances: np.ndarray = field(repr=False)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_active_rows(self) -> int:
        return self.n_rows_physical - len(self.blank_rows)

    @property
    def n_banks(self) -> int:
        return self.n_active_rows // self.bank_rows

    @property
    def n_channels(self) -> int:
        return self.n_cols * self.bank_rows

    def element_id(self, col: int, active_row: int) -> int:
        """Row-major element id, column fastest."""
        return active_row * self.n_cols + col

    def bank_members(self, bank: int) -> np.ndarray:
        """Element ids belonging to one multiplexer bank."""
        return np.flatnonzero(self.banks == bank)

    def wavelength(self, frequency: float | None = None) -> float:
        return self.sound_speed / (frequency or self.center_frequency)
