"""Image-quality metrics: beam profiles, FWHM, SMER, contrast."""

from __future__ import annotations

import numpy as np

from nsi3d.exceptions import MetricError
from nsi3d.logging_config import get_logger
from nsi3d.models.metrics import (
    BeamProfile,
    ContrastStats,
    Crossing,
    ProfileAxis,
    ResolutionSummary,
    ShellRegion,
    SphereRegion,
)
from nsi3d.models.volume import EnvelopeVolume

logger = get_logger("nsi3d.imaging.metrics")

HALF_MAX = 0.5
SIDE_LOBE_FLOOR = 0.01  # -40 dB
SMER_FLOOR_DB = -120.0
MIN_REGION_VOXELS = 100
CYST_INSIDE_FRACTION = 0.8
CYST_SHELL = (1.2, 1.8)


def make_profile(
    axis: ProfileAxis | str, coordinates: np.ndarray, amplitudes: np.ndarray
) -> BeamProfile:
    """Normalize a sampled 1-D cut to its peak."""
    axis = ProfileAxis(axis)
    amplitudes = np.asarray(amplitudes, dtype=float)
    coordinates = np.asarray(coordinates, dtype=float)
    if amplitudes.shape != coordinates.shape or amplitudes.ndim != 1 or amplitudes.size == 0:
        raise MetricError("profile", "coordinates and amplitudes must be equal-length 1-D arrays")
    if not np.all(np.isfinite(amplitudes)):
        raise MetricError("profile", "amplitudes must be finite")
    peak_index = int(np.argmax(amplitudes))
    peak = amplitudes[peak_index]
    if peak <= 0:
        raise MetricError("profile", "profile is all zero")
    return BeamProfile(
        axis=axis,
        coordinates=coordinates,
        amplitudes=amplitudes / peak,
        peak_index=peak_index,
        truncated=peak_index in (0, amplitudes.size - 1),
    )


def profile_through_max(
    volume: EnvelopeVolume,
    axis: ProfileAxis | str,
    z_window: tuple[float, float] | None = None,
) -> BeamProfile:
    """Line through the brightest voxel along `axis`, peak-normalized.

    With `z_window` the brightest voxel is searched only between those depths,
    which isolates one target of a multi-point phantom.
    """
    axis = ProfileAxis(axis)
    values = np.asarray(volume.values, dtype=float)
    search = values
    z = volume.grid.z
    if z_window is not None:
        keep = (z >= z_window[0]) & (z <= z_window[1])
        if not keep.any():
            raise MetricError("profile", f"depth window {z_window} holds no voxels")
        search = np.where(keep[None, None, :], values, -np.inf)
    if not np.any(search > 0):
        raise MetricError("profile", "volume is all zero")
    peak = np.unravel_index(int(np.argmax(search)), values.shape)

    index: list[int | slice] = list(peak)
    index[axis.grid_index] = slice(None)
    line = values[tuple(index)]
    profile = make_profile(axis, volume.grid.axis(axis.grid_index), line)
    if profile.truncated:
        logger.warning(
            "Profile peak on grid boundary",
            extra={"axis": axis.value, "label": volume.label_name},
        )
    return profile


def crossing(profile: BeamProfile, level: float, side: int) -> Crossing | None:
    """First point outward from the peak where the profile falls to `level`.

    `side` is -1 (towards lower coordinates) or +1. Returns None when the
    level is never reached before the profile ends.
    """
    a = profile.amplitudes
    x = profile.coordinates
    p = profile.peak_index
    if side > 0:
        below = np.flatnonzero(a[p + 1 :] <= level)
        if below.size == 0:
            return None
        j = p + 1 + int(below[0])
        i = j - 1
    else:
        below = np.flatnonzero(a[:p][::-1] <= level)
        if below.size == 0:
            return None
        j = p - 1 - int(below[0])
        i = j + 1
    return _interpolate(profile, level, i, j)


def outer_crossing(profile: BeamProfile, level: float, side: int) -> Crossing | None:
    """Outermost point on one side of the peak where the profile falls to `level`.

    Scans inward from the profile end for the last sample above `level`, so
    side lobes beyond a deep null stay inside the bound. Returns None when the
    end sample itself is above `level`.
    """
    a = profile.amplitudes
    p = profile.peak_index
    if side > 0:
        i = p + int(np.flatnonzero(a[p:] > level)[-1])
        if i == a.size - 1:
            return None
        j = i + 1
    else:
        i = int(np.flatnonzero(a[: p + 1] > level)[0])
        if i == 0:
            return None
        j = i - 1
    return _interpolate(profile, level, i, j)


def _interpolate(profile: BeamProfile, level: float, i: int, j: int) -> Crossing:
    a = profile.amplitudes
    x = profile.coordinates
    frac = (a[i] - level) / (a[i] - a[j])
    return Crossing(position=float(x[i] + frac * (x[j] - x[i])))


def _or_end(profile: BeamProfile, found: Crossing | None, side: int) -> Crossing:
    if found is not None:
        return found
    end = profile.coordinates[-1] if side > 0 else profile.coordinates[0]
    return Crossing(position=float(end), clamped=True)


def fwhm(profile: BeamProfile, level: float = HALF_MAX) -> float:
    """Width at half amplitude (-6 dB), linearly interpolated."""
    left = crossing(profile, level, -1)
    right = crossing(profile, level, +1)
    if left is None or right is None:
        side = "lower" if left is None else "upper"
        raise MetricError("fwhm", f"unresolved lobe on the {side} side")
    return right.position - left.position


def _integrate(profile: BeamProfile, lo: float, hi: float) -> float:
    """Integral of the piecewise-linear profile between two coordinates."""
    if hi <= lo:
        return 0.0
    x = profile.coordinates
    inner = x[(x > lo) & (x < hi)]
    xs = np.concatenate(([lo], inner, [hi]))
    return float(np.trapezoid(np.interp(xs, x, profile.amplitudes), xs))


def smer_details(profile: BeamProfile) -> tuple[float, bool]:
    """SMER in dB and whether any bound was clamped to the profile end.

    The main lobe spans the innermost -6 dB crossings. Each side-lobe region
    runs from there to the outermost -40 dB crossing on the same side.
    """
    l6 = _or_end(profile, crossing(profile, HALF_MAX, -1), -1)
    r6 = _or_end(profile, crossing(profile, HALF_MAX, +1), +1)
    l40 = _or_end(profile, outer_crossing(profile, SIDE_LOBE_FLOOR, -1), -1)
    r40 = _or_end(profile, outer_crossing(profile, SIDE_LOBE_FLOOR, +1), +1)
    clamped = any(c.clamped for c in (l6, r6, l40, r40))

    main = _integrate(profile, l6.position, r6.position)
    if main <= 0:
        raise MetricError("smer", "main-lobe integral is zero")
    if clamped:
        logger.warning(
            "SMER bounds clamped to profile end", extra={"axis": profile.axis.value}
        )
    x = profile.coordinates
    outside = (x < l6.position) | (x > r6.position)
    if not np.any(profile.amplitudes[outside] > 0):
        return SMER_FLOOR_DB, clamped
    side = _integrate(profile, l40.position, l6.position) + _integrate(
        profile, r6.position, r40.position
    )
    if side <= 0:
        return SMER_FLOOR_DB, clamped
    return max(20.0 * float(np.log10(side / main)), SMER_FLOOR_DB), clamped


def smer(profile: BeamProfile) -> float:
    """Side-to-main-lobe energy ratio between the -6 dB and -40 dB crossings, in dB."""
    return smer_details(profile)[0]


def cyst_regions(
    center: tuple[float, float, float], radius: float
) -> tuple[SphereRegion, ShellRegion]:
    """Inside sphere at 80% of the cyst radius and a background shell at 1.2-1.8x."""
    inside = SphereRegion(center, CYST_INSIDE_FRACTION * radius)
    outside = ShellRegion(center, CYST_SHELL[0] * radius, CYST_SHELL[1] * radius)
    return inside, outside


def contrast(
    volume: EnvelopeVolume,
    inside: SphereRegion,
    outside: ShellRegion | SphereRegion,
    min_voxels: int = MIN_REGION_VOXELS,
) -> ContrastStats:
    """Region statistics for CR and CNR, on the linear envelope."""
    points = volume.grid.points()
    values = np.asarray(volume.values, dtype=float).ravel()
    in_mask = inside.contains(points)
    out_mask = outside.contains(points)
    if np.any(in_mask & out_mask):
        raise MetricError("contrast", "inside and outside regions overlap")
    for name, mask in (("inside", in_mask), ("outside", out_mask)):
        count = int(mask.sum())
        if count == 0:
            raise MetricError("contrast", f"{name} region is empty")
        if count < min_voxels:
            raise MetricError(
                "contrast", f"{name} region holds {count} voxels, need {min_voxels}"
            )
    v_in = values[in_mask]
    v_out = values[out_mask]
    stats = ContrastStats(
        mu_inside=float(v_in.mean()),
        mu_outside=float(v_out.mean()),
        sigma_inside=float(v_in.std()),
        sigma_outside=float(v_out.std()),
        n_inside=int(v_in.size),
        n_outside=int(v_out.size),
        inside=inside,
        outside=outside,
    )
    if stats.mu_inside + stats.mu_outside <= 0:
        raise MetricError("contrast", "both regions have zero mean")
    return stats


def summarize_resolution(
    volume: EnvelopeVolume, z_window: tuple[float, float] | None = None
) -> ResolutionSummary:
    """FWHM and SMER in azimuth and elevation through the volume peak."""
    az = profile_through_max(volume, ProfileAxis.AZIMUTH, z_window)
    el = profile_through_max(volume, ProfileAxis.ELEVATION, z_window)
    smer_az, clamped_az = smer_details(az)
    smer_el, clamped_el = smer_details(el)
    return ResolutionSummary(
        label=volume.label_name,
        fwhm_azimuth=fwhm(az),
        fwhm_elevation=fwhm(el),
        smer_azimuth=smer_az,
        smer_elevation=smer_el,
        smer_clamped=clamped_az or clamped_el,
    )


def resolution_area_reduction(das: ResolutionSummary, nsi: ResolutionSummary) -> float:
    """Fractional shrink of the -6 dB beam area (azimuth x elevation width)."""
    if das.beam_area <= 0:
        raise MetricError("resolution_area", "reference beam area is zero")
    return 1.0 - nsi.beam_area / das.beam_area
