"""End-to-end acceptance runs on the desk preset.

These simulate the full 812-element circular aperture and take minutes;
deselect with `-m "not slow"`.
"""

import pytest

from tests.nsi3d.integration.conftest import desk_runner

pytestmark = pytest.mark.slow


def _columns(result):
    return {row["column"]: row for row in result.summary}


def test_nsi_narrows_the_point_spread_function(points_result):
    columns = _columns(points_result)
    das = columns["circular_das"]
    nsi = columns["circular_nsi"]

    azimuth = nsi["fwhm_azimuth_mm"] / das["fwhm_azimuth_mm"]
    elevation = nsi["fwhm_elevation_mm"] / das["fwhm_elevation_mm"]

    assert 0.72 <= azimuth <= 0.88
    assert 0.72 <= elevation <= 0.88
    assert 1.0 - azimuth * elevation >= 0.28


def test_nsi_lowers_side_lobe_energy(points_result):
    columns = _columns(points_result)
    das = columns["circular_das"]
    nsi = columns["circular_nsi"]

    assert nsi["smer_azimuth_db"] <= das["smer_azimuth_db"] - 1.5
    assert nsi["smer_elevation_db"] <= das["smer_elevation_db"] - 1.5


@pytest.mark.parametrize("plane", ["xz", "yz"])
def test_nsi_raises_contrast_and_lowers_cnr(cyst_result, plane):
    rows = {
        row["method"]: row
        for row in cyst_result.summary
        if row["aperture"] == "circular" and row["plane"] == plane
    }

    assert rows["nsi"]["cr"] >= 1.10 * rows["das"]["cr"]
    assert rows["nsi"]["cnr"] < rows["das"]["cnr"]


def test_nsi_costs_at_most_three_and_a_half_das_passes(tmp_path):
    runner = desk_runner(tmp_path, aperture={"kind": "circular"})

    _, report = runner.bench(repeats=1)

    assert report.ratio <= 3.5
