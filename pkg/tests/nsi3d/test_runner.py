"""Scenario runner tests on small grids and sparse apertures."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from nsi3d.exceptions import ApertureError, ConfigurationError
from nsi3d.export.volume_dump import read_volume
from nsi3d.models.volume import VolumeLabel
from nsi3d.runner import ScenarioRunner
from nsi3d.schemas.experiment import ExperimentConfig, config_hash
from nsi3d.settings import RunSettings
from tests.nsi3d.helpers import gaussian_volume, small_grid


def read_table(path: Path) -> tuple[str, list[dict[str, str]]]:
    """Provenance line and rows of a written table."""
    with path.open(encoding="utf-8") as handle:
        provenance = handle.readline().strip()
        rows = list(csv.DictReader(handle))
    return provenance, rows


@pytest.fixture
def settings(tmp_path):
    return RunSettings(workers=2, output_dir=tmp_path)


def make_runner(settings: RunSettings, **data) -> ScenarioRunner:
    return ScenarioRunner(ExperimentConfig.model_validate(data), settings)


def points_config() -> dict:
    return {
        "scenario": "points",
        "aperture": {"kind": "spiral_no_reuse"},
        "sequence": {"depth_mm": 50.0},
        "grid": {
            "x_range_mm": (-4.0, 4.0),
            "y_range_mm": (-4.0, 4.0),
            "z_range_mm": (36.0, 44.0),
            "dims": (17, 17, 17),
        },
        "phantom": {"point_depths_mm": [40.0]},
    }


def cyst_config() -> dict:
    return {
        "scenario": "cyst",
        "aperture": {"kind": "spiral_no_reuse"},
        "sequence": {"depth_mm": 50.0},
        "grid": {
            "x_range_mm": (-3.0, 3.0),
            "y_range_mm": (-3.0, 3.0),
            "z_range_mm": (37.0, 43.0),
            "dims": (61, 61, 61),
        },
        "phantom": {
            "box_mm": (6.0, 6.0, 6.0),
            "box_center_mm": (0.0, 0.0, 40.0),
            "cyst_diameter_mm": 3.0,
            "density": 2.0,
        },
    }


# ---------------------------------------------------------------------------
# Shared building blocks
# ---------------------------------------------------------------------------


def test_run_id_and_config_file(settings):
    runner = make_runner(settings)

    result = runner.export_rates()

    digest = config_hash(runner.config)
    assert result.run_id == f"rates-{digest[:12]}"
    assert result.output_dir == settings.output_dir / result.run_id
    written = json.loads((result.output_dir / "config.json").read_text(encoding="utf-8"))
    assert ExperimentConfig.model_validate(written) == runner.config


def test_config_output_dir_wins_over_settings(settings, tmp_path):
    target = tmp_path / "elsewhere"
    runner = make_runner(settings, output_dir=str(target))

    result = runner.export_rates()

    assert result.output_dir.parent == target


def test_grid_with_dims(settings):
    grid = make_runner(settings, **points_config()).grid()

    assert grid.dims == (17, 17, 17)
    np.testing.assert_allclose(grid.z[[0, -1]], [36e-3, 44e-3])


def test_grid_defaults_to_half_wavelength_spacing(settings):
    runner = make_runner(
        settings,
        grid={"x_range_mm": (-1.0, 1.0), "y_range_mm": (-1.0, 1.0),
              "z_range_mm": (39.0, 41.0), "dims": None},
    )

    grid = runner.grid()

    wavelength = 1540.0 / 3.0e6
    n = math.floor(2e-3 / (0.5 * wavelength)) + 1
    assert grid.dims == (n, n, n)
    assert grid.spacing[0] == pytest.approx(2e-3 / (n - 1))


def test_plane_grids_collapse_one_axis(settings):
    runner = make_runner(settings, **cyst_config())

    xz = runner.grid("xz")
    yz = runner.grid("yz")

    assert xz.dims == (61, 1, 61)
    assert yz.dims == (1, 61, 61)
    assert xz.y[0] == pytest.approx(0.0)


def test_aperture_kinds(settings):
    assert [k.value for k in make_runner(settings, aperture={"kind": "all"}).aperture_kinds()] == [
        "circular", "spiral", "spiral_no_reuse",
    ]
    everything = make_runner(settings, aperture={"kind": "all"}).aperture_kinds(True)
    assert everything[-1].value == "rectangular"
    assert [k.value for k in make_runner(settings).aperture_kinds(True)] == ["circular"]


# ---------------------------------------------------------------------------
# design and rates
# ---------------------------------------------------------------------------


def test_export_design_all(settings):
    result = make_runner(settings, aperture={"kind": "all"}).export_design()

    out = result.output_dir
    by_kind = {row["aperture"]: row for row in result.summary}
    assert by_kind["circular"]["n_elements"] == 812
    assert by_kind["circular"]["zm_sum"] == pytest.approx(-4.0)
    assert by_kind["spiral"]["n_elements"] == 256
    assert by_kind["spiral_no_reuse"]["n_elements"] == 227
    assert by_kind["spiral_no_reuse"]["conflict_free"] is True
    assert by_kind["circular"]["conflict_free"] is False
    assert by_kind["rectangular"]["n_inner"] == 484

    _, geometry_rows = read_table(out / "geometry.csv")
    assert len(geometry_rows) == 1024
    _, circular_rows = read_table(out / "aperture_circular.csv")
    assert len(circular_rows) == 812
    for label in ("rect", "zm", "dc1", "dc2"):
        assert (out / f"weights_spiral_{label}.pgm").exists()
    assert (out / "apertures.csv").exists()


def test_export_rates(settings):
    result = make_runner(settings, aperture={"kind": "all"}).export_rates()

    by_kind = {row["aperture"]: row for row in result.summary}
    assert by_kind["circular"]["n_events"] == 144
    assert by_kind["circular"]["volume_rate_hz"] == pytest.approx(76.39, abs=1.0)
    assert by_kind["circular"]["rf_megabytes"] == pytest.approx(63.8, abs=0.1)
    assert by_kind["spiral_no_reuse"]["n_events"] == 9
    assert by_kind["spiral_no_reuse"]["volume_rate_hz"] == pytest.approx(1222.2, abs=5.0)

    provenance, plan_rows = read_table(result.output_dir / "plan_spiral_no_reuse.csv")
    assert provenance.startswith("# config_hash=")
    assert len(plan_rows) == 9
    assert (result.output_dir / "rates.csv") in result.artifacts


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def points_result(tmp_path_factory):
    out = tmp_path_factory.mktemp("points")
    runner = ScenarioRunner(
        ExperimentConfig.model_validate(points_config()),
        RunSettings(workers=2, output_dir=out),
    )
    return runner.run()


def test_points_writes_tables_profiles_and_slices(points_result):
    out = points_result.output_dir
    for name in ("resolution_by_depth.csv", "resolution_table.csv"):
        assert (out / name).exists()
    for label in ("e_das", "e_nsi"):
        for axis in ("azimuth", "elevation"):
            assert (out / f"profile_spiral_no_reuse_{label}_{axis}.csv").exists()
        for suffix in ("xz", "yz", "c40mm"):
            assert (out / f"spiral_no_reuse_{label}_{suffix}.pgm").exists()


def test_points_nsi_narrows_the_main_lobe(points_result):
    _, rows = read_table(points_result.output_dir / "resolution_by_depth.csv")
    das = next(r for r in rows if r["method"] == "das")
    nsi = next(r for r in rows if r["method"] == "nsi")

    assert float(das["depth_mm"]) == pytest.approx(40.0)
    assert 0 < float(nsi["fwhm_azimuth_mm"]) < float(das["fwhm_azimuth_mm"])


def test_points_summary_columns(points_result):
    columns = [row["column"] for row in points_result.summary]

    assert columns == ["spiral_no_reuse_das", "spiral_no_reuse_nsi"]
    assert all(math.isfinite(row["fwhm_azimuth_mm"]) for row in points_result.summary)


def test_points_volume_dump_reads_back(points_result):
    volume, meta = read_volume(points_result.output_dir / "spiral_no_reuse_e_nsi.json")

    assert volume.grid.dims == (17, 17, 17)
    assert meta["label"] == VolumeLabel.NSI.value
    peak = np.unravel_index(int(np.argmax(volume.values)), volume.values.shape)
    assert all(abs(i - 8) <= 1 for i in peak)


def test_points_outside_the_grid_is_a_configuration_error(settings):
    data = points_config()
    data["phantom"] = {"point_depths_mm": [60.0]}

    with pytest.raises(ConfigurationError, match="no point depth"):
        make_runner(settings, **data).run_points()


def test_depth_windows_split_between_neighbours(settings):
    data = points_config()
    data["grid"]["z_range_mm"] = (15.0, 65.0)
    data["phantom"] = {"point_depths_mm": [20.0, 30.0, 40.0, 50.0, 60.0, 80.0]}
    runner = make_runner(settings, **data)

    windows = dict(runner._depth_windows())

    assert 80.0 not in windows
    lo, hi = windows[40.0]
    assert lo == pytest.approx(35e-3)
    assert hi == pytest.approx(45e-3)
    assert runner._reference_depth(list(windows.items())) == 40.0


def test_rf_dump_when_requested(tmp_path):
    runner = ScenarioRunner(
        ExperimentConfig.model_validate(points_config()),
        RunSettings(workers=2, output_dir=tmp_path),
        dump_rf=True,
    )

    result = runner.run()

    assert result.output_dir / "rf_spiral_no_reuse" / "rf.json" in result.artifacts


# ---------------------------------------------------------------------------
# cyst
# ---------------------------------------------------------------------------


def test_cyst_contrast_table(settings):
    result = make_runner(settings, **cyst_config()).run()

    _, rows = read_table(result.output_dir / "contrast.csv")
    assert [(r["plane"], r["method"]) for r in rows] == [
        ("xz", "das"), ("xz", "nsi"), ("yz", "das"), ("yz", "nsi"),
    ]
    for row in rows:
        assert int(row["n_inside"]) >= 100
        assert int(row["n_outside"]) >= 100
        assert float(row["mu_inside"]) < float(row["mu_outside"])
        assert 0 < float(row["cr"]) <= 1
    for plane in ("xz", "yz"):
        assert (result.output_dir / f"cyst_spiral_no_reuse_e_das_{plane}.pgm").exists()


def test_cyst_phantom_is_seeded(settings):
    runner = make_runner(settings, **cyst_config())

    first = runner.cyst_phantom()
    second = runner.cyst_phantom()

    np.testing.assert_array_equal(first.positions, second.positions)
    np.testing.assert_array_equal(first.amplitudes, second.amplitudes)


# ---------------------------------------------------------------------------
# beampattern
# ---------------------------------------------------------------------------


def test_beampattern_lobe_widths(settings):
    runner = make_runner(
        settings,
        scenario="beampattern",
        imaging={"beampattern_points": 41, "beampattern_half_angle_deg": 10.0},
    )

    result = runner.run()

    out = result.output_dir
    row = result.summary[0]
    assert row["aperture"] == "circular"
    assert row["azimuth_ratio"] < 1.0
    assert row["elevation_ratio"] < 1.0
    assert row["zm_null_db"] <= -40.0
    _, widths = read_table(out / "lobe_widths.csv")
    assert [r["window"] for r in widths] == ["rect", "nsi"]
    for label in ("rect", "zm", "dc1", "dc2", "nsi"):
        assert (out / f"pattern_circular_{label}.pgm").exists()
    _, pattern_rows = read_table(out / "pattern_circular_rect.csv")
    assert len(pattern_rows) == 41 * 41


def test_unbalanced_aperture_fails_its_stage(settings):
    runner = make_runner(settings, aperture={"r_in_pitches": 15.9})

    with pytest.raises(ApertureError, match="imbalance"):
        runner.export_design()


# ---------------------------------------------------------------------------
# bench and offline metrics
# ---------------------------------------------------------------------------


def test_bench_report(settings):
    data = points_config()
    data["grid"]["dims"] = (9, 9, 9)
    result, report = make_runner(settings, **data).bench(repeats=1)

    assert report.n_voxels == 729
    assert report.das_seconds > 0
    assert report.ratio == pytest.approx(report.nsi_seconds / report.das_seconds)
    _, rows = read_table(result.output_dir / "bench.csv")
    assert rows[0]["aperture"] == "spiral_no_reuse"
    assert int(rows[0]["workers"]) == 2


def test_measure_volumes_skips_unmeasurable_contrast(settings):
    grid = small_grid(40e-3, 3e-3, 21)
    blob = gaussian_volume((0.8e-3, 0.6e-3, 1e-3), grid)
    runner = make_runner(settings)

    result = runner.measure_volumes([blob], ["blob_volume"])

    _, resolution = read_table(result.output_dir / "resolution.csv")
    _, contrast = read_table(result.output_dir / "contrast.csv")
    assert [r["volume"] for r in resolution] == ["blob_volume"]
    fwhm = 2 * math.sqrt(2 * math.log(2)) * 0.8
    assert float(resolution[0]["fwhm_azimuth_mm"]) == pytest.approx(fwhm, rel=0.05)
    assert contrast == []


def test_repeated_runs_write_identical_tables(points_result, tmp_path):
    """A second run of the same config reproduces the metric tables byte for byte."""
    # Arrange
    runner = ScenarioRunner(
        ExperimentConfig.model_validate(points_config()),
        RunSettings(workers=2, output_dir=tmp_path),
    )

    # Act
    again = runner.run()

    # Assert
    for name in ("resolution_by_depth.csv", "resolution_table.csv"):
        first = (points_result.output_dir / name).read_text(encoding="utf-8")
        assert (again.output_dir / name).read_text(encoding="utf-8") == first
