"""Aperture masks and receive apodization sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ApertureKind(str, Enum):
    """Aperture layouts understood by the planner and the window generator."""

    CIRCULAR = "circular"
    SPIRAL = "spiral"
    SPIRAL_NO_REUSE = "spiral_no_reuse"
    RECTANGULAR = "rectangular"


STANDARD_APERTURES = (ApertureKind.CIRCULAR, ApertureKind.SPIRAL, ApertureKind.SPIRAL_NO_REUSE)


@dataclass(frozen=True)
class ApertureMask:
    """A set of active elements split into an inner and an outer region."""

    kind: ApertureKind
    element_ids: tuple[int, ...]
    inner_ids: frozenset[int]
    r_in: float | None = None
    r_out: float | None = None

    @property
    def n_elements(self) -> int:
        return len(self.element_ids)

    @property
    def n_inner(self) -> int:
        return len(self.inner_ids)

    @property
    def n_outer(self) -> int:
        return self.n_elements - self.n_inner

    @property
    def outer_ids(self) -> frozenset[int]:
        return frozenset(self.element_ids) - self.inner_ids

    def ids_array(self) -> np.ndarray:
        return np.asarray(self.element_ids, dtype=np.int64)

    def inner_flags(self) -> np.ndarray:
        """Boolean per masked element, aligned with `element_ids`."""
        return np.fromiter((i in self.inner_ids for i in self.element_ids), dtype=bool,
                           count=self.n_elements)


@dataclass(frozen=True, eq=False)
class IdealSpiral:
    """Ideal (off-grid) sparse-array positions in the aperture plane."""

    r_max: float
    points: np.ndarray = field(repr=False)

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])


RECT = "rect"
ZM = "zm"
DC1 = "dc1"
DC2 = "dc2"
WINDOW_LABELS = (RECT, ZM, DC1, DC2)


@dataclass(frozen=True, eq=False)
class ApodizationSet:
    """Rectangular and zero-mean/DC-offset receive windows over one mask.

    Weight arrays are aligned with `mask.element_ids`.
    """

    mask: ApertureMask
    dc: float
    zm_outer_sign: int
    w_rect: np.ndarray = field(repr=False)
    w_zm: np.ndarray = field(repr=False)
    w_dc1: np.ndarray = field(repr=False)
    w_dc2: np.ndarray = field(repr=False)

    def windows(self) -> dict[str, np.ndarray]:
        return {RECT: self.w_rect, ZM: self.w_zm, DC1: self.w_dc1, DC2: self.w_dc2}

    def element_weights(
        self, n_elements: int, labels: tuple[str, ...] = WINDOW_LABELS
    ) -> dict[str, np.ndarray]:
        """Full-length weight vectors indexed by element id; NaN off the mask."""
        ids = self.mask.ids_array()
        windows = self.windows()
        out = {}
        for label in labels:
            full = np.full(n_elements, np.nan)
            full[ids] = windows[label]
            out[label] = full
        return out
