"""Continuous-wave beampatterns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class BeamPattern2D:
    """Array response on a lateral x-y plane at fixed depth.

    `values` is shaped (len(x), len(y)); `reference` is the response
    magnitude at the on-axis focal point.
    """

    label: str
    depth: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    reference: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def normalized_db(self, floor_db: float = -120.0) -> np.ndarray:
        mag = self.magnitude
        peak = mag.max()
        if peak <= 0:
            return np.full(mag.shape, floor_db)
        with np.errstate(divide="ignore"):
            return np.maximum(20.0 * np.log10(mag / peak), floor_db)


@dataclass(frozen=True)
class ResolutionCell:
    """Axial length and lateral -6 dB widths used to size speckle phantoms."""

    axial: float
    azimuth: float
    elevation: float

    @property
    def volume(self) -> float:
        return self.axial * self.azimuth * self.elevation


@dataclass(frozen=True)
class LobeWidths:
    label: str
    azimuth: float
    elevation: float
