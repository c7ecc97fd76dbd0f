"""Tests for nsi3d/export/."""

import json
from unittest.mock import patch

import numpy as np
import pytest
from PIL import Image

from nsi3d.audit import ArtifactEvent
from nsi3d.exceptions import ConfigurationError
from nsi3d.export.csv_tables import format_value, read_table, write_table
from nsi3d.export.raster import db_to_uint16, weight_map, write_db_image, write_weight_map
from nsi3d.export.volume_dump import read_volume, write_rf, write_volume
from nsi3d.export.writer import ArtifactWriter
from nsi3d.imaging.forward_sim import make_point_phantom, simulate_acquisition
from nsi3d.imaging.tx_sequence import build_plan, virtual_sources
from nsi3d.models.volume import EnvelopeVolume, VolumeLabel
from nsi3d.schemas.experiment import ExperimentConfig, config_hash
from tests.nsi3d.helpers import gaussian_volume, small_grid

# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "value, expected",
    [
        (True, "true"),
        (np.bool_(False), "false"),
        (0.1234567891234, "0.123456789"),
        (np.float32(2.5), "2.5"),
        (np.int64(7), "7"),
        (None, ""),
        ("E_NSI", "E_NSI"),
    ],
)
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_table_carries_provenance(tmp_path):
    path = write_table(tmp_path / "sub" / "t.csv", ["label", "fwhm_mm"],
                       [("E_DAS", 3.04), ("E_NSI", 2.45)], "abc123", 9)

    provenance, rows = read_table(path)

    assert path.read_text().splitlines()[0] == "# config_hash=abc123 seed=9"
    assert provenance == {"config_hash": "abc123", "seed": "9"}
    assert rows == [{"label": "E_DAS", "fwhm_mm": "3.04"}, {"label": "E_NSI", "fwhm_mm": "2.45"}]


# ---------------------------------------------------------------------------
# Rasters
# ---------------------------------------------------------------------------


def test_weight_map_layout(geom, circular_apod):
    """Blank rows are mid-gray, off-mask elements black, ZM weights span 32..255."""
    zm = circular_apod.element_weights(geom.n_elements)["zm"]

    image = weight_map(zm, geom)

    assert image.shape == (35, 32)
    assert image.dtype == np.uint8
    for row in (9, 17, 25):
        assert np.all(image[row - 1] == 128)
    assert image[0, 0] == 0
    assert image[17, 15] == 32
    assert set(np.unique(image)) == {0, 32, 128, 255}


def test_weight_map_of_a_flat_window_is_white(geom, circular_apod):
    rect = circular_apod.element_weights(geom.n_elements)["rect"]
    image = weight_map(rect, geom)
    assert set(np.unique(image)) == {0, 128, 255}


def test_weight_map_writes_a_pgm(tmp_path, geom, circular_apod):
    path = write_weight_map(tmp_path / "zm.pgm", circular_apod.element_weights(1024)["zm"], geom)

    with Image.open(path) as img:
        assert img.format == "PPM"
        assert img.size == (32, 35)
        assert img.mode == "L"


def test_db_to_uint16_scaling():
    levels = db_to_uint16(np.array([0.0, -25.0, -50.0, -80.0, 3.0]), 50.0)
    assert levels.tolist() == [65535, 32768, 0, 0, 65535]


def test_db_image_is_sixteen_bit(tmp_path):
    db = np.linspace(-50.0, 0.0, 12).reshape(3, 4)

    path = write_db_image(tmp_path / "slice.pgm", db, 50.0)

    with Image.open(path) as img:
        assert img.size == (4, 3)
        pixels = np.asarray(img)
    assert pixels.max() == 65535
    assert pixels.min() == 0


# ---------------------------------------------------------------------------
# Volume and RF dumps
# ---------------------------------------------------------------------------


def test_volume_dump_round_trip(tmp_path):
    grid = small_grid(n=5)
    volume = gaussian_volume((1e-3, 1e-3, 1e-3), grid)
    volume = EnvelopeVolume(grid, volume.values, VolumeLabel.NSI)

    raw, header = write_volume(tmp_path / "vol_nsi", volume, 50.0, "hash")
    loaded, meta = read_volume(header)

    assert raw.stat().st_size == 4 * 125
    assert meta["order"] == "z-fastest"
    assert meta["config_hash"] == "hash"
    assert loaded.label is VolumeLabel.NSI
    assert loaded.grid == grid
    np.testing.assert_allclose(loaded.values, volume.values, rtol=1e-6)


def test_volume_dump_is_z_fastest(tmp_path):
    grid = small_grid(n=3)
    values = np.arange(27, dtype=float).reshape(grid.dims)
    volume = EnvelopeVolume(grid, values, "ramp")

    raw, _ = write_volume(tmp_path / "ramp", volume, 40.0)

    flat = np.fromfile(raw, dtype="<f4")
    assert flat[:3].tolist() == [0.0, 1.0, 2.0]


def test_truncated_volume_dump_is_rejected(tmp_path):
    grid = small_grid(n=3)
    raw, header = write_volume(tmp_path / "v", gaussian_volume((1e-3,) * 3, grid), 50.0)
    raw.write_bytes(raw.read_bytes()[:40])

    with pytest.raises(ConfigurationError, match="header says 27"):
        read_volume(header)


def test_unreadable_volume_header_is_rejected(tmp_path):
    header = tmp_path / "broken.json"
    header.write_text("{}")
    with pytest.raises(ConfigurationError, match="unreadable volume dump"):
        read_volume(header)


@pytest.fixture(scope="module")
def small_dataset(geom, spiral_no_reuse, pulse):
    plan = build_plan(spiral_no_reuse, geom, sources=virtual_sources()[:2])
    return simulate_acquisition(plan, make_point_phantom([20e-3]), geom, pulse, n_samples=400)


def test_rf_dump_layout(tmp_path, small_dataset, spiral_no_reuse):
    header = write_rf(tmp_path / "rf", small_dataset, "hash")

    meta = json.loads(header.read_text())
    assert meta["n_samples"] == 400
    assert len(meta["events"]) == 2
    first = meta["events"][0]
    assert first["channels"] == list(spiral_no_reuse.element_ids)
    assert first["tx_bank"] is None
    data = np.fromfile(header.parent / first["data_file"], dtype="<f4")
    assert data.size == spiral_no_reuse.n_elements * 400
    np.testing.assert_allclose(
        data.reshape(-1, 400), small_dataset.events[0].data, rtol=1e-6,
        atol=1e-6 * np.abs(small_dataset.events[0].data).max(),
    )


# ---------------------------------------------------------------------------
# ArtifactWriter
# ---------------------------------------------------------------------------


def test_writer_records_and_audits_every_artifact(tmp_path, geom, circular_apod):
    config = ExperimentConfig(seed=4)
    writer = ArtifactWriter(tmp_path, config)

    with patch("nsi3d.audit.audit_logger") as mock_logger:
        table = writer.table("t.csv", ["a"], [(1,), (2,)])
        pgm = writer.weight_map("w.pgm", circular_apod.element_weights(1024)["zm"], geom)
        cfg = writer.config_file()

    assert writer.written == [table, pgm, cfg]
    assert mock_logger.info.call_count == 3
    extra = mock_logger.info.call_args_list[0].kwargs["extra"]
    assert extra["artifact_event"] == ArtifactEvent.METRICS_EXPORTED.value
    assert extra["config_hash"] == config_hash(config)
    assert extra["rows"] == 2


def test_writer_tables_carry_the_seed(tmp_path):
    writer = ArtifactWriter(tmp_path, ExperimentConfig(seed=12))

    path = writer.table("rates.csv", ["aperture"], [("circular",)], ArtifactEvent.RATES_EXPORTED)

    provenance, _ = read_table(path)
    assert provenance["seed"] == "12"
    assert provenance["config_hash"] == writer.config_hash


def test_writer_config_file_round_trips(tmp_path):
    config = ExperimentConfig(scenario="beampattern")
    path = ArtifactWriter(tmp_path, config).config_file()
    assert ExperimentConfig.model_validate_json(path.read_text()) == config


def test_writer_volume_and_rf(tmp_path, small_dataset):
    writer = ArtifactWriter(tmp_path, ExperimentConfig())
    volume = gaussian_volume((1e-3,) * 3, small_grid(n=3))

    with patch("nsi3d.audit.audit_logger") as mock_logger:
        header = writer.volume("vol", volume, 50.0)
        rf_header = writer.rf("rf", small_dataset)

    assert header.suffix == ".json"
    assert rf_header.name == "rf.json"
    events = [c.kwargs["extra"]["artifact_event"] for c in mock_logger.info.call_args_list]
    assert events == ["volume.dumped", "rf.dumped"]
