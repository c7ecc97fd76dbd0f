"""PGM rasters of apodization maps, volume slices and beampatterns."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from nsi3d.models.geometry import ArrayGeometry

BLANK_ROW_LEVEL = 128
OFF_MASK_LEVEL = 0


def _save_pgm(path: Path, pixels: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path, format="PPM")
    return path


def weight_map(weights: np.ndarray, geom: ArrayGeometry) -> np.ndarray:
    """8-bit image of per-element weights on the physical grid.

    Rows are physical rows (blank rows mid-gray), columns are array columns.
    Masked elements span 32..255 from the lowest to the highest weight;
    elements off the mask (NaN) are black.
    """
    image = np.full((geom.n_rows_physical, geom.n_cols), OFF_MASK_LEVEL, dtype=np.uint8)
    for row in geom.blank_rows:
        image[row - 1, :] = BLANK_ROW_LEVEL
    w = np.asarray(weights, dtype=float)
    on = ~np.isnan(w)
    if on.any():
        lo, hi = float(w[on].min()), float(w[on].max())
        scaled = np.full(w.shape, 255.0)
        if hi > lo:
            scaled = 32.0 + 223.0 * (w - lo) / (hi - lo)
        physical_rows = np.array([e.physical_row for e in geom.elements]) - 1
        ids = np.flatnonzero(on)
        image[physical_rows[ids], geom.cols[ids]] = np.rint(scaled[ids]).astype(np.uint8)
    return image


def write_weight_map(path: Path, weights: np.ndarray, geom: ArrayGeometry) -> Path:
    return _save_pgm(path, weight_map(weights, geom))


def db_to_uint16(db: np.ndarray, dynamic_range_db: float) -> np.ndarray:
    """Map [-DR, 0] dB linearly onto 0..65535."""
    scaled = (np.clip(db, -dynamic_range_db, 0.0) + dynamic_range_db) / dynamic_range_db
    return np.rint(scaled * 65535.0).astype(np.int32)


def write_db_image(path: Path, db_image: np.ndarray, dynamic_range_db: float) -> Path:
    """16-bit PGM of a 2-D dB image, rows top to bottom."""
    return _save_pgm(path, db_to_uint16(db_image, dynamic_range_db))
