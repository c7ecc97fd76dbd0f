"""Small builders shared by several test modules."""

from __future__ import annotations

import numpy as np

from nsi3d.models.volume import EnvelopeVolume, VoxelGrid

PITCH = 300e-6


def small_grid(depth: float = 40e-3, half: float = 3e-3, n: int = 9) -> VoxelGrid:
    """A cube of n^3 voxels centred on the z axis at `depth`."""
    return VoxelGrid.from_extents(
        (-half, half), (-half, half), (depth - half, depth + half), (n, n, n)
    )


def gaussian_volume(sigmas: tuple[float, float, float], grid: VoxelGrid,
                    center: tuple[float, float, float] | None = None) -> EnvelopeVolume:
    """Separable Gaussian blob on `grid`."""
    if center is None:
        center = tuple(float(np.mean(grid.axis(i))) for i in range(3))
    xx, yy, zz = np.meshgrid(grid.x, grid.y, grid.z, indexing="ij")
    values = np.exp(
        -((xx - center[0]) ** 2) / (2 * sigmas[0] ** 2)
        - ((yy - center[1]) ** 2) / (2 * sigmas[1] ** 2)
        - ((zz - center[2]) ** 2) / (2 * sigmas[2] ** 2)
    )
    return EnvelopeVolume(grid=grid, values=values, label="blob")
