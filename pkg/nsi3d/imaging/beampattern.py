"""Narrowband array response for arbitrary receive apodization."""

from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np

from nsi3d.exceptions import ApertureError
from nsi3d.imaging.array_geometry import SIMULATION_FREQUENCY
from nsi3d.imaging.metrics import fwhm, make_profile
from nsi3d.logging_config import get_logger
from nsi3d.models.acquisition import Pulse
from nsi3d.models.aperture import DC1, DC2, RECT, ZM, ApertureMask, ApodizationSet
from nsi3d.models.beampattern import BeamPattern2D, LobeWidths, ResolutionCell
from nsi3d.models.geometry import ArrayGeometry
from nsi3d.models.metrics import ProfileAxis

logger = get_logger("nsi3d.imaging.beampattern")

DEFAULT_DEPTH = 40e-3
DEFAULT_HALF_ANGLE_DEG = 20.0
DEFAULT_POINTS = 121
NSI = "nsi"
_POINT_BLOCK = 2048


def _full_weights(weights: np.ndarray, geom: ArrayGeometry) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (geom.n_elements,):
        raise ApertureError(
            f"expected {geom.n_elements} element weights, got shape {w.shape}"
        )
    return np.nan_to_num(w, nan=0.0)


def _responses(
    weight_rows: np.ndarray,
    geom: ArrayGeometry,
    focus_depth: float,
    field_points: np.ndarray,
    frequency: float,
) -> np.ndarray:
    """Responses for several weight vectors at once, shape (n_rows, n_points)."""
    if focus_depth <= 0:
        raise ApertureError(f"focus depth must be positive, got {focus_depth!r}")
    active = np.flatnonzero(np.any(weight_rows != 0, axis=0))
    out = np.zeros((weight_rows.shape[0], field_points.shape[0]), dtype=complex)
    if active.size == 0:
        return out
    positions = geom.positions[active]
    w = weight_rows[:, active]
    k = 2.0 * math.pi * frequency / geom.sound_speed
    focus = np.array([0.0, 0.0, focus_depth])
    d_focus = np.linalg.norm(positions - focus, axis=1)
    for start in range(0, field_points.shape[0], _POINT_BLOCK):
        block = field_points[start : start + _POINT_BLOCK]
        d = np.linalg.norm(block[:, None, :] - positions[None, :, :], axis=2)
        phase = np.exp(1j * k * (d - d_focus))
        out[:, start : start + _POINT_BLOCK] = w @ phase.T
    return out


def cw_response(
    weights: np.ndarray,
    geom: ArrayGeometry,
    focus_depth: float,
    field_points: np.ndarray,
    frequency: float = SIMULATION_FREQUENCY,
) -> np.ndarray | complex:
    """Focused single-frequency response of the weighted array.

    `weights` holds one value per element; NaN counts as off. Focusing
    phases are referenced to the on-axis point at `focus_depth`. A single
    (3,) field point gives a complex scalar.
    """
    points = np.asarray(field_points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    row = _full_weights(weights, geom)[None, :]
    response = _responses(row, geom, focus_depth, points, frequency)[0]
    return complex(response[0]) if single else response


def lateral_plane(
    depth: float,
    half_angle_deg: float = DEFAULT_HALF_ANGLE_DEG,
    n_points: int = DEFAULT_POINTS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x and y axes spanning +-tan(half_angle) * depth, and the (nx*ny, 3) points."""
    half = depth * math.tan(math.radians(half_angle_deg))
    axis = np.linspace(-half, half, n_points)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack((xx.ravel(), yy.ravel(), np.full(xx.size, depth)))
    return axis, axis.copy(), points


def pattern_set(
    weights: Mapping[str, np.ndarray],
    geom: ArrayGeometry,
    depth: float = DEFAULT_DEPTH,
    half_angle_deg: float = DEFAULT_HALF_ANGLE_DEG,
    n_points: int = DEFAULT_POINTS,
    frequency: float = SIMULATION_FREQUENCY,
) -> dict[str, BeamPattern2D]:
    """Patterns of several weightings on one lateral plane, focused at `depth`."""
    labels = list(weights)
    rows = np.vstack([_full_weights(weights[label], geom) for label in labels])
    x, y, points = lateral_plane(depth, half_angle_deg, n_points)
    responses = _responses(rows, geom, depth, points, frequency)
    focal = _responses(rows, geom, depth, np.array([[0.0, 0.0, depth]]), frequency)[:, 0]
    return {
        label: BeamPattern2D(
            label=label,
            depth=depth,
            x=x,
            y=y,
            values=responses[i].reshape(x.size, y.size),
            reference=float(abs(focal[i])),
        )
        for i, label in enumerate(labels)
    }


def _nsi_magnitude(zm: np.ndarray, dc1: np.ndarray, dc2: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 0.5 * (np.abs(dc1) + np.abs(dc2)) - np.abs(zm))


def nsi_patterns(
    apod: ApodizationSet,
    geom: ArrayGeometry,
    depth: float = DEFAULT_DEPTH,
    half_angle_deg: float = DEFAULT_HALF_ANGLE_DEG,
    n_points: int = DEFAULT_POINTS,
    frequency: float = SIMULATION_FREQUENCY,
) -> dict[str, BeamPattern2D]:
    """Rect, ZM, DC1, DC2 and the combined NSI pattern of one apodization set."""
    patterns = pattern_set(
        apod.element_weights(geom.n_elements), geom, depth, half_angle_deg, n_points, frequency
    )
    zm, dc1, dc2 = patterns[ZM], patterns[DC1], patterns[DC2]
    values = _nsi_magnitude(zm.values, dc1.values, dc2.values)
    reference = float(_nsi_magnitude(zm.reference, dc1.reference, dc2.reference))
    patterns[NSI] = BeamPattern2D(
        label=NSI, depth=depth, x=zm.x, y=zm.y, values=values, reference=reference
    )
    logger.debug(
        "Beampatterns computed",
        extra={
            "aperture": apod.mask.kind.value,
            "depth_mm": depth * 1e3,
            "zm_null_db": 20.0 * math.log10(max(zm.reference, 1e-30) / max(dc1.reference, 1e-30)),
        },
    )
    return patterns


def nsi_pattern(
    apod: ApodizationSet,
    geom: ArrayGeometry,
    depth: float = DEFAULT_DEPTH,
    half_angle_deg: float = DEFAULT_HALF_ANGLE_DEG,
    n_points: int = DEFAULT_POINTS,
    frequency: float = SIMULATION_FREQUENCY,
) -> BeamPattern2D:
    """max(0, (|B_DC1| + |B_DC2|)/2 - |B_ZM|) on the lateral plane at `depth`."""
    return nsi_patterns(apod, geom, depth, half_angle_deg, n_points, frequency)[NSI]


def lobe_widths(pattern: BeamPattern2D) -> LobeWidths:
    """-6 dB main-lobe widths along x and y through the pattern peak."""
    mag = pattern.magnitude
    ix, iy = np.unravel_index(int(np.argmax(mag)), mag.shape)
    az = make_profile(ProfileAxis.AZIMUTH, pattern.x, mag[:, iy])
    el = make_profile(ProfileAxis.ELEVATION, pattern.y, mag[ix, :])
    return LobeWidths(label=pattern.label, azimuth=fwhm(az), elevation=fwhm(el))


def axial_pulse_length(pulse: Pulse, sound_speed: float) -> float:
    """Half the spatial -6 dB length of the Gaussian pulse envelope."""
    duration = 4.0 * math.log(2.0) / (math.pi * pulse.center_frequency * pulse.fractional_bandwidth)
    return 0.5 * sound_speed * duration


def estimate_resolution_cell(
    mask: ApertureMask,
    geom: ArrayGeometry,
    pulse: Pulse,
    depth: float = DEFAULT_DEPTH,
) -> ResolutionCell:
    """Axial pulse length times the rect-window lobe widths of `mask` at `depth`."""
    weights = np.zeros(geom.n_elements)
    weights[mask.ids_array()] = 1.0
    # narrow window: only the main lobe matters here
    pattern = pattern_set(
        {RECT: weights}, geom, depth, half_angle_deg=8.0, n_points=161,
        frequency=pulse.center_frequency,
    )[RECT]
    widths = lobe_widths(pattern)
    return ResolutionCell(
        axial=axial_pulse_length(pulse, geom.sound_speed),
        azimuth=widths.azimuth,
        elevation=widths.elevation,
    )
