"""Aperture masks (circular, Fermat spiral, spiral no-reuse, rectangular) and NSI windows."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from nsi3d.exceptions import ApertureError
from nsi3d.imaging.array_geometry import is_conflict_free
from nsi3d.logging_config import get_logger
from nsi3d.models.aperture import ApertureKind, ApertureMask, ApodizationSet, IdealSpiral
from nsi3d.models.geometry import ArrayGeometry

logger = get_logger("nsi3d.imaging.aperture_design")

R_OUT_PITCHES = 16.0
R_IN_PITCHES = 11.5
N_SPIRAL_POINTS = 256
SIGMA_D = 0.7
MAX_CANDIDATE_PITCHES = 2.0
RECT_INNER_SIZE = 22
DEFAULT_DC = 1.0

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

_IMBALANCE_WARN = 0.05
_IMBALANCE_MAX = 0.10


def _radius_tolerance(geom: ArrayGeometry) -> float:
    return 1e-9 * geom.pitch


def _inner_ids(geom: ArrayGeometry, ids: np.ndarray, r_in: float | None) -> frozenset[int]:
    if r_in is None:
        return frozenset()
    inside = geom.radial_distances[ids] <= r_in + _radius_tolerance(geom)
    return frozenset(ids[inside].tolist())


def _make_mask(
    kind: ApertureKind,
    geom: ArrayGeometry,
    ids: np.ndarray,
    r_in: float | None,
    r_out: float | None,
) -> ApertureMask:
    ids = np.unique(ids)
    return ApertureMask(
        kind=kind,
        element_ids=tuple(ids.tolist()),
        inner_ids=_inner_ids(geom, ids, r_in),
        r_in=r_in,
        r_out=r_out,
    )


def circular_mask(
    geom: ArrayGeometry, r_out: float | None = None, r_in: float | None = None
) -> ApertureMask:
    """Every element whose radial distance is within `r_out`.

    Defaults are 16 and 11.5 pitches for the outer and inner radii.
    """
    r_out = R_OUT_PITCHES * geom.pitch if r_out is None else r_out
    r_in = R_IN_PITCHES * geom.pitch if r_in is None else r_in
    if r_out <= 0:
        raise ApertureError(f"r_out must be positive, got {r_out!r}")
    ids = np.flatnonzero(geom.radial_distances <= r_out + _radius_tolerance(geom))
    if ids.size == 0:
        raise ApertureError(f"circular aperture of radius {r_out:.3e} m contains no elements")
    mask = _make_mask(ApertureKind.CIRCULAR, geom, ids, r_in, r_out)
    logger.debug(
        "Circular mask",
        extra={"n_elements": mask.n_elements, "n_inner": mask.n_inner, "n_outer": mask.n_outer},
    )
    return mask


def rectangular_mask(geom: ArrayGeometry, inner_size: int = RECT_INNER_SIZE) -> ApertureMask:
    """Fully-addressed aperture with a central `inner_size` x `inner_size` inner region."""
    n_rows = geom.n_active_rows
    if inner_size < 0:
        raise ApertureError(f"inner size must be non-negative, got {inner_size}")
    if inner_size >= min(geom.n_cols, n_rows):
        raise ApertureError(
            f"inner {inner_size}x{inner_size} region leaves no outer elements "
            f"on a {geom.n_cols}x{n_rows} grid"
        )
    if (geom.n_cols - inner_size) % 2 or (n_rows - inner_size) % 2:
        raise ApertureError(f"inner {inner_size}x{inner_size} region cannot be centred")

    col_lo = (geom.n_cols - inner_size) // 2
    row_lo = (n_rows - inner_size) // 2
    inside = (
        (geom.cols >= col_lo)
        & (geom.cols < col_lo + inner_size)
        & (geom.active_rows >= row_lo)
        & (geom.active_rows < row_lo + inner_size)
    )
    return ApertureMask(
        kind=ApertureKind.RECTANGULAR,
        element_ids=tuple(range(geom.n_elements)),
        inner_ids=frozenset(np.flatnonzero(inside).tolist()),
    )


def fermat_spiral_ideal(n: int = N_SPIRAL_POINTS, r_max: float = 16 * 300e-6) -> IdealSpiral:
    """Uniform-density golden-angle spiral with `n` points inside `r_max`."""
    if n < 1:
        raise ApertureError(f"spiral needs at least one point, got {n}")
    k = np.arange(n)
    radius = r_max * np.sqrt((k + 0.5) / n)
    theta = k * GOLDEN_ANGLE
    points = np.column_stack((radius * np.cos(theta), radius * np.sin(theta)))
    points.setflags(write=False)
    return IdealSpiral(r_max=r_max, points=points)


def _aperture_candidates(geom: ArrayGeometry, r_out: float) -> np.ndarray:
    ids = np.flatnonzero(geom.radial_distances <= r_out + _radius_tolerance(geom))
    if ids.size == 0:
        raise ApertureError(f"no elements within r_out={r_out:.3e} m")
    return ids


def quantize_to_grid(
    ideal: IdealSpiral, geom: ArrayGeometry, r_in: float | None = None
) -> ApertureMask:
    """Snap each ideal point to its nearest element inside the aperture.

    Several points landing on the same element keep it once.
    """
    if ideal.n_points == 0:
        raise ApertureError("ideal spiral is empty")
    r_in = R_IN_PITCHES * geom.pitch if r_in is None else r_in
    candidates = _aperture_candidates(geom, ideal.r_max)
    tree = cKDTree(geom.logical_xy[candidates])
    _, nearest = tree.query(ideal.points)
    ids = candidates[np.asarray(nearest)]
    mask = _make_mask(ApertureKind.SPIRAL, geom, ids, r_in, ideal.r_max)
    if mask.n_elements < ideal.n_points:
        logger.info(
            "Spiral quantization collapsed duplicate targets",
            extra={"n_points": ideal.n_points, "n_elements": mask.n_elements},
        )
    return mask


def selection_score(d_min: np.ndarray | float, sigma_d: float = SIGMA_D) -> np.ndarray | float:
    """Gaussian-kernel element score, exp(-d_min / (2 sigma_d^2)).

    `d_min` is in pitch units and enters unsquared.
    """
    if sigma_d <= 0:
        raise ApertureError(f"sigma_d must be positive, got {sigma_d!r}")
    d = np.asarray(d_min, dtype=float)
    if np.any(d < 0):
        raise ApertureError("d_min must be non-negative")
    score = np.exp(-d / (2.0 * sigma_d**2))
    return float(score) if score.ndim == 0 else score


def no_reuse_select(
    ideal: IdealSpiral,
    geom: ArrayGeometry,
    sigma_d: float = SIGMA_D,
    r_in: float | None = None,
    max_candidate_distance: float = MAX_CANDIDATE_PITCHES,
) -> ApertureMask:
    """Pick at most one element per multiplexer channel close to the spiral.

    All (ideal point, element) pairs within `max_candidate_distance` pitches are
    scored and visited in descending score order, ties going to the lower
    channel id and then the lower element id. A pair is accepted when neither
    its channel nor its ideal point has been taken.
    """
    if ideal.n_points == 0:
        raise ApertureError("ideal spiral is empty")
    r_in = R_IN_PITCHES * geom.pitch if r_in is None else r_in
    candidates = _aperture_candidates(geom, ideal.r_max)
    tree = cKDTree(geom.logical_xy[candidates] / geom.pitch)
    neighbours = tree.query_ball_point(ideal.points / geom.pitch, r=max_candidate_distance)

    point_idx = np.repeat(np.arange(ideal.n_points), [len(n) for n in neighbours])
    if point_idx.size == 0:
        raise ApertureError("no candidate elements near the ideal spiral")
    element_ids = candidates[np.concatenate([np.asarray(n, dtype=np.int64) for n in neighbours])]
    delta = (geom.logical_xy[element_ids] - ideal.points[point_idx]) / geom.pitch
    d_min = np.hypot(delta[:, 0], delta[:, 1])
    score = selection_score(d_min, sigma_d)
    channels = geom.channels[element_ids]

    # lexsort keys are listed least significant first
    order = np.lexsort((point_idx, element_ids, channels, -score))
    taken_channels: set[int] = set()
    taken_points: set[int] = set()
    selected: list[int] = []
    for pair in order.tolist():
        channel = int(channels[pair])
        point = int(point_idx[pair])
        if channel in taken_channels or point in taken_points:
            continue
        taken_channels.add(channel)
        taken_points.add(point)
        selected.append(int(element_ids[pair]))

    mask = _make_mask(ApertureKind.SPIRAL_NO_REUSE, geom, np.asarray(selected), r_in, ideal.r_max)
    if not is_conflict_free(geom, mask.element_ids):
        raise ApertureError("no-reuse selection produced a channel conflict")
    logger.info(
        "Spiral no-reuse selection",
        extra={
            "n_points": ideal.n_points,
            "n_elements": mask.n_elements,
            "n_inner": mask.n_inner,
            "n_outer": mask.n_outer,
        },
    )
    return mask


def zero_mean_weights(mask: ApertureMask, zm_outer_sign: int = 1) -> np.ndarray:
    """Signed window: `zm_outer_sign` on outer elements, its negative on inner ones."""
    if zm_outer_sign not in (1, -1):
        raise ApertureError(f"zm_outer_sign must be +1 or -1, got {zm_outer_sign}")
    inner = mask.inner_flags()
    return np.where(inner, -float(zm_outer_sign), float(zm_outer_sign))


def nsi_windows(
    mask: ApertureMask,
    geom: ArrayGeometry | None = None,
    r_in: float | None = None,
    dc: float = DEFAULT_DC,
    zm_outer_sign: int = 1,
) -> ApodizationSet:
    """Rectangular, zero-mean and the two DC-offset receive windows.

    When `r_in` is given the inner/outer split is recomputed from the
    element radial distances of `geom`; otherwise the mask's own split is used.
    """
    if r_in is not None:
        if geom is None:
            raise ApertureError("re-partitioning by r_in needs the array geometry")
        mask = ApertureMask(
            kind=mask.kind,
            element_ids=mask.element_ids,
            inner_ids=_inner_ids(geom, mask.ids_array(), r_in),
            r_in=r_in,
            r_out=mask.r_out,
        )
    if dc <= 0:
        raise ApertureError(f"dc offset must be positive, got {dc!r}")
    if mask.n_inner == 0 or mask.n_outer == 0:
        raise ApertureError("aperture cannot form zero-mean window")

    imbalance = abs(mask.n_inner - mask.n_outer) / mask.n_elements
    if imbalance > _IMBALANCE_MAX:
        raise ApertureError(
            f"inner/outer imbalance {imbalance:.3f} exceeds {_IMBALANCE_MAX} "
            f"({mask.n_inner} inner, {mask.n_outer} outer)"
        )
    if imbalance > _IMBALANCE_WARN:
        logger.warning(
            "Unbalanced zero-mean window",
            extra={"imbalance": round(imbalance, 4), "n_inner": mask.n_inner,
                   "n_outer": mask.n_outer},
        )

    w_zm = zero_mean_weights(mask, zm_outer_sign)
    w_rect = np.ones(mask.n_elements)
    w_dc1 = w_zm + dc
    w_dc2 = -w_zm + dc
    for weights in (w_rect, w_zm, w_dc1, w_dc2):
        weights.setflags(write=False)
    return ApodizationSet(
        mask=mask,
        dc=dc,
        zm_outer_sign=zm_outer_sign,
        w_rect=w_rect,
        w_zm=w_zm,
        w_dc1=w_dc1,
        w_dc2=w_dc2,
    )


def design_aperture(
    kind: ApertureKind | str,
    geom: ArrayGeometry,
    r_out_pitches: float = R_OUT_PITCHES,
    r_in_pitches: float = R_IN_PITCHES,
    n_spiral: int = N_SPIRAL_POINTS,
    sigma_d: float = SIGMA_D,
    max_candidate_distance: float = MAX_CANDIDATE_PITCHES,
    rect_inner_size: int = RECT_INNER_SIZE,
) -> ApertureMask:
    """Build the mask of one aperture kind from pitch-relative parameters."""
    kind = ApertureKind(kind)
    r_out = r_out_pitches * geom.pitch
    r_in = r_in_pitches * geom.pitch
    if kind is ApertureKind.CIRCULAR:
        return circular_mask(geom, r_out=r_out, r_in=r_in)
    if kind is ApertureKind.RECTANGULAR:
        return rectangular_mask(geom, inner_size=rect_inner_size)
    ideal = fermat_spiral_ideal(n_spiral, r_out)
    if kind is ApertureKind.SPIRAL:
        return quantize_to_grid(ideal, geom, r_in=r_in)
    return no_reuse_select(
        ideal, geom, sigma_d=sigma_d, r_in=r_in, max_candidate_distance=max_candidate_distance
    )
