"""Beam profiles and contrast statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ProfileAxis(str, Enum):
    AZIMUTH = "azimuth"
    ELEVATION = "elevation"
    AXIAL = "axial"

    @property
    def grid_index(self) -> int:
        return {"azimuth": 0, "elevation": 1, "axial": 2}[self.value]


@dataclass(frozen=True, eq=False)
class BeamProfile:
    """Peak-normalized 1-D cut through a volume or pattern.

    `truncated` is set when the peak sits on the first or last sample.
    """

    axis: ProfileAxis
    coordinates: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)
    peak_index: int
    truncated: bool = False

    @property
    def peak_position(self) -> float:
        return float(self.coordinates[self.peak_index])

    def db(self, floor_db: float = -120.0) -> np.ndarray:
        with np.errstate(divide="ignore"):
            values = 20.0 * np.log10(self.amplitudes)
        return np.maximum(values, floor_db)


@dataclass(frozen=True)
class Crossing:
    """Where a profile falls through a level on one side of its peak."""

    position: float
    clamped: bool = False


@dataclass(frozen=True)
class SphereRegion:
    center: tuple[float, float, float]
    radius: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points - np.asarray(self.center), axis=1) <= self.radius


@dataclass(frozen=True)
class ShellRegion:
    center: tuple[float, float, float]
    inner_radius: float
    outer_radius: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(points - np.asarray(self.center), axis=1)
        return (r >= self.inner_radius) & (r <= self.outer_radius)


@dataclass(frozen=True)
class ContrastStats:
    mu_inside: float
    mu_outside: float
    sigma_inside: float
    sigma_outside: float
    n_inside: int
    n_outside: int
    inside: SphereRegion
    outside: ShellRegion | SphereRegion

    @property
    def cr(self) -> float:
        return (self.mu_outside - self.mu_inside) / (self.mu_outside + self.mu_inside)

    @property
    def cnr(self) -> float:
        sigma = float(np.hypot(self.sigma_inside, self.sigma_outside))
        diff = self.mu_outside - self.mu_inside
        if sigma == 0:
            return 0.0 if diff == 0 else float(np.copysign(np.inf, diff))
        return diff / sigma


@dataclass(frozen=True)
class ResolutionSummary:
    """Widths and side-lobe ratios of one volume through its peak."""

    label: str
    fwhm_azimuth: float
    fwhm_elevation: float
    smer_azimuth: float
    smer_elevation: float
    smer_clamped: bool = False

    @property
    def beam_area(self) -> float:
        return self.fwhm_azimuth * self.fwhm_elevation
