"""Voxel grids and reconstructed envelope volumes."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class VolumeLabel(str, Enum):
    DAS = "E_DAS"
    ZM = "E_ZM"
    DC1 = "E_DC1"
    DC2 = "E_DC2"
    NSI = "E_NSI"


@dataclass(frozen=True)
class VoxelGrid:
    """Regular grid, axis order (x, y, z); flattening is z-fastest."""

    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    dims: tuple[int, int, int]

    @classmethod
    def from_extents(
        cls,
        x_range: tuple[float, float],
        y_range: tuple[float, float],
        z_range: tuple[float, float],
        dims: tuple[int, int, int],
    ) -> "VoxelGrid":
        """Grid whose first and last samples sit on the range bounds.

        An axis with one sample sits at the range midpoint.
        """
        origin = []
        spacing = []
        for (lo, hi), n in zip((x_range, y_range, z_range), dims):
            if n == 1:
                origin.append(0.5 * (lo + hi))
                spacing.append(max(hi - lo, 1.0))
            else:
                origin.append(lo)
                spacing.append((hi - lo) / (n - 1))
        return cls(tuple(origin), tuple(spacing), tuple(int(n) for n in dims))

    @classmethod
    def with_spacing(
        cls,
        x_range: tuple[float, float],
        y_range: tuple[float, float],
        z_range: tuple[float, float],
        spacing: float,
    ) -> "VoxelGrid":
        dims = tuple(
            max(1, int(np.floor((hi - lo) / spacing + 1e-9)) + 1)
            for lo, hi in (x_range, y_range, z_range)
        )
        origin = tuple(lo for lo, _ in (x_range, y_range, z_range))
        return cls(origin, (spacing, spacing, spacing), dims)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    def axis(self, index: int) -> np.ndarray:
        return self.origin[index] + self.spacing[index] * np.arange(self.dims[index])

    @property
    def x(self) -> np.ndarray:
        return self.axis(0)

    @property
    def y(self) -> np.ndarray:
        return self.axis(1)

    @property
    def z(self) -> np.ndarray:
        return self.axis(2)

    def points(self) -> np.ndarray:
        """Voxel centres as an (n_voxels, 3) array, z fastest."""
        xx, yy, zz = np.meshgrid(self.x, self.y, self.z, indexing="ij")
        return np.column_stack((xx.ravel(), yy.ravel(), zz.ravel()))

    def nearest_index(self, point: tuple[float, float, float]) -> tuple[int, int, int]:
        return tuple(
            int(np.clip(np.rint((p - o) / s), 0, n - 1))
            for p, o, s, n in zip(point, self.origin, self.spacing, self.dims)
        )


@dataclass(frozen=True, eq=False)
class EnvelopeVolume:
    """Non-negative linear envelope on a voxel grid, shaped `grid.dims`."""

    grid: VoxelGrid
    values: np.ndarray = field(repr=False)
    label: VolumeLabel | str

    @property
    def label_name(self) -> str:
        return self.label.value if isinstance(self.label, VolumeLabel) else str(self.label)
