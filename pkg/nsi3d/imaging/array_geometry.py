"""Matrix array layout and 4-to-1 multiplexer channel structure."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable
from functools import lru_cache

import numpy as np

from nsi3d.exceptions import ConfigurationError, GeometryError
from nsi3d.logging_config import get_logger
from nsi3d.models.geometry import ArrayGeometry, Element

logger = get_logger("nsi3d.imaging.array_geometry")

DEFAULT_PITCH = 300e-6
DEFAULT_N_COLS = 32
DEFAULT_N_ROWS_PHYSICAL = 35
DEFAULT_BLANK_ROWS = (9, 17, 25)
BANK_ROWS = 8
PROBE_CENTER_FREQUENCY = 3.5e6
SIMULATION_FREQUENCY = 3.0e6
FRACTIONAL_BANDWIDTH = 0.70
SOUND_SPEED = 1540.0


def _validate_blank_rows(
    blank_rows: Iterable[int], n_rows_physical: int, bank_rows: int
) -> tuple[int, ...]:
    blanks = tuple(sorted(set(int(b) for b in blank_rows)))
    for row in blanks:
        if not 1 < row < n_rows_physical:
            raise ConfigurationError(
                "blank row must lie strictly inside the physical grid",
                field="blank_rows",
                value=row,
                module="array_geometry",
            )
    n_active = n_rows_physical - len(blanks)
    if n_active <= 0 or n_active % bank_rows:
        raise ConfigurationError(
            f"{n_active} active rows do not split into banks of {bank_rows}",
            field="blank_rows",
            value=blanks,
            module="array_geometry",
        )
    return blanks


def build_matrix_array(
    pitch: float = DEFAULT_PITCH,
    blank_rows: Iterable[int] = DEFAULT_BLANK_ROWS,
    n_cols: int = DEFAULT_N_COLS,
    n_rows_physical: int = DEFAULT_N_ROWS_PHYSICAL,
    bank_rows: int = BANK_ROWS,
    center_frequency: float = PROBE_CENTER_FREQUENCY,
    fractional_bandwidth: float = FRACTIONAL_BANDWIDTH,
    sound_speed: float = SOUND_SPEED,
) -> ArrayGeometry:
    """Build the gridded matrix probe.

    Elements are ordered row-major with the column index fastest. Physical
    positions keep one pitch of gap at every blank row and are centred on the
    midpoint between the outermost element rows and columns. Radial distances
    are taken on the logical element grid, where blank rows do not exist.
    """
    if pitch <= 0:
        raise ConfigurationError("pitch must be positive", field="pitch", value=pitch,
                                 module="array_geometry")
    blanks = _validate_blank_rows(blank_rows, n_rows_physical, bank_rows)

    physical_rows = np.array(
        [r for r in range(1, n_rows_physical + 1) if r not in blanks], dtype=np.int64
    )
    n_active = physical_rows.size
    y_center = 0.5 * (physical_rows[0] + physical_rows[-1])
    x_center = 0.5 * (n_cols - 1)
    logical_center_row = 0.5 * (n_active - 1)

    active_rows, cols = np.divmod(np.arange(n_active * n_cols), n_cols)
    positions = np.zeros((active_rows.size, 3))
    positions[:, 0] = (cols - x_center) * pitch
    positions[:, 1] = (physical_rows[active_rows] - y_center) * pitch
    logical_xy = np.column_stack(
        ((cols - x_center) * pitch, (active_rows - logical_center_row) * pitch)
    )
    radial = np.hypot(logical_xy[:, 0], logical_xy[:, 1])
    banks = active_rows // bank_rows
    channels = cols * bank_rows + active_rows % bank_rows

    elements = tuple(
        Element(
            element_id=i,
            col=int(cols[i]),
            active_row=int(active_rows[i]),
            physical_row=int(physical_rows[active_rows[i]]),
            position=(float(positions[i, 0]), float(positions[i, 1]), 0.0),
            bank=int(banks[i]),
            channel=int(channels[i]),
            radial_distance=float(radial[i]),
        )
        for i in range(active_rows.size)
    )
    for array in (positions, logical_xy, cols, active_rows, banks, channels, radial):
        array.setflags(write=False)

    geom = ArrayGeometry(
        pitch=pitch,
        n_cols=n_cols,
        n_rows_physical=n_rows_physical,
        blank_rows=blanks,
        bank_rows=bank_rows,
        center_frequency=center_frequency,
        fractional_bandwidth=fractional_bandwidth,
        sound_speed=sound_speed,
        elements=elements,
        positions=positions,
        logical_xy=logical_xy,
        cols=cols,
        active_rows=active_rows,
        banks=banks,
        channels=channels,
        radial_distances=radial,
    )
    logger.debug(
        "Matrix array built",
        extra={"n_elements": geom.n_elements, "n_banks": geom.n_banks, "blank_rows": blanks},
    )
    return geom


@lru_cache(maxsize=1)
def get_default_geometry() -> ArrayGeometry:
    """The 1024-element probe with blank rows 9, 17 and 25."""
    return build_matrix_array()


def _as_index_array(geom: ArrayGeometry, element_ids: Iterable[int]) -> np.ndarray:
    ids = np.unique(np.fromiter((int(i) for i in element_ids), dtype=np.int64))
    bad = ids[(ids < 0) | (ids >= geom.n_elements)]
    if bad.size:
        raise GeometryError(f"element index out of range: {int(bad[0])}")
    return ids


def channel_conflicts(
    geom: ArrayGeometry, element_ids: Iterable[int]
) -> list[tuple[int, frozenset[int]]]:
    """Channels claimed by two or more elements of the set, in channel order.

    An empty result means the set can be driven in a single TX/RX event.
    """
    ids = _as_index_array(geom, element_ids)
    claimed: dict[int, set[int]] = defaultdict(set)
    for element_id, channel in zip(ids.tolist(), geom.channels[ids].tolist()):
        claimed[channel].add(element_id)
    return [
        (channel, frozenset(members))
        for channel, members in sorted(claimed.items())
        if len(members) > 1
    ]


def is_conflict_free(geom: ArrayGeometry, element_ids: Iterable[int]) -> bool:
    ids = _as_index_array(geom, element_ids)
    return np.unique(geom.channels[ids]).size == ids.size
