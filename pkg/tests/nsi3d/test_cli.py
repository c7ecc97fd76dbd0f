"""Command-line tests: parsing, config layering, exit codes and printed summaries."""

from __future__ import annotations

import json
from unittest.mock import patch

import pytest

from nsi3d.cli import build_parser, config_overrides, main, resolve
from nsi3d.export.volume_dump import write_volume
from tests.nsi3d.helpers import gaussian_volume, small_grid


@pytest.fixture(autouse=True)
def no_telemetry():
    """Keep the CLI from installing or shutting down the global tracer provider."""
    with patch("nsi3d.cli.setup_telemetry"), patch("nsi3d.cli.shutdown_telemetry") as shutdown:
        yield shutdown


def write_json(path, data) -> str:
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# Parsing and config layering
# ---------------------------------------------------------------------------


def test_overrides_only_hold_given_flags():
    args = build_parser().parse_args(["design", "--aperture", "spiral", "--zm-sign", "-1"])

    assert config_overrides(args) == {"aperture": {"kind": "spiral", "zm_outer_sign": -1}}


def test_run_flags_map_to_config_sections(tmp_path):
    args = build_parser().parse_args(
        ["run", "--scenario", "cyst", "--dc", "0.5", "--compound", "incoherent",
         "--seed", "7", "--output", str(tmp_path)]
    )

    overrides = config_overrides(args)

    assert overrides["scenario"] == "cyst"
    assert overrides["seed"] == 7
    assert overrides["output_dir"] == str(tmp_path)
    assert overrides["aperture"] == {"dc": 0.5}
    assert overrides["imaging"] == {"compound": "incoherent"}


def test_metrics_cyst_flags(tmp_path):
    args = build_parser().parse_args(
        ["metrics", str(tmp_path / "a.json"), "--cyst-center", "0", "1", "40",
         "--cyst-diameter", "8"]
    )

    overrides = config_overrides(args)

    assert overrides["phantom"] == {"cyst_center_mm": [0.0, 1.0, 40.0], "cyst_diameter_mm": 8.0}


def test_flags_win_over_config_file(tmp_path):
    config = write_json(tmp_path / "c.json", {"preset": "full", "aperture": {"kind": "circular",
                                                                             "dc": 2.0}})
    args = build_parser().parse_args(["design", "--config", config, "--aperture", "spiral"])

    resolved = resolve(args)

    assert resolved.preset == "full"
    assert resolved.aperture.kind == "spiral"
    assert resolved.aperture.dc == 2.0
    assert resolved.phantom.point_depths_mm == [20.0, 30.0, 40.0, 50.0, 60.0]


def test_unknown_aperture_is_rejected_by_the_parser():
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["design", "--aperture", "hexagonal"])

    assert excinfo.value.code == 2


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def test_design_prints_summary(tmp_path, capsys, no_telemetry):
    code = main(["design", "--output", str(tmp_path)])

    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[0].startswith("# design run_id=design-")
    assert out[1] == "aperture,n_elements,n_inner,n_outer,zm_sum,conflict_free,shared_channels"
    assert out[2].startswith("circular,812,408,404,-4,False,")
    no_telemetry.assert_called_once()


def test_rates_for_the_no_reuse_spiral(tmp_path, capsys):
    code = main(["rates", "--aperture", "spiral_no_reuse", "--output", str(tmp_path),
                 "--workers", "1"])

    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[1].split(",")[:5] == [
        "aperture", "n_elements", "n_angles", "events_per_angle", "n_events",
    ]
    assert out[2].split(",")[:5] == ["spiral_no_reuse", "227", "9", "1", "9"]


def test_zero_workers_is_a_configuration_error(capsys):
    code = main(["design", "--workers", "0"])

    assert code == 2
    assert "--workers must be at least 1" in capsys.readouterr().err


def test_malformed_config_file(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")

    code = main(["design", "--config", str(path), "--output", str(tmp_path)])

    assert code == 2
    assert "config: config is not valid JSON" in capsys.readouterr().err


def test_unknown_config_field(tmp_path, capsys):
    config = write_json(tmp_path / "c.json", {"aperture": {"radius": 3}})

    code = main(["design", "--config", config, "--output", str(tmp_path)])

    assert code == 2
    assert "config:" in capsys.readouterr().err


def test_invalid_config_value(tmp_path, capsys):
    config = write_json(tmp_path / "c.json", {"pulse": {"sampling_rate_hz": 8e6}})

    code = main(["design", "--config", config, "--output", str(tmp_path)])

    assert code == 2
    assert "sampling rate" in capsys.readouterr().err


def test_compute_failure_exits_with_module_message(tmp_path, capsys):
    config = write_json(tmp_path / "c.json", {"aperture": {"r_in_pitches": 15.9}})

    code = main(["design", "--config", config, "--output", str(tmp_path)])

    assert code == 3
    assert "aperture_design: inner/outer imbalance" in capsys.readouterr().err


def test_metrics_on_dumped_volumes(tmp_path, capsys):
    grid = small_grid(40e-3, 3e-3, 21)
    write_volume(tmp_path / "blob", gaussian_volume((0.8e-3, 0.6e-3, 1e-3), grid), 50.0)

    code = main(["metrics", str(tmp_path / "blob.json"), "--output", str(tmp_path / "out")])

    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[0].startswith("# metrics run_id=metrics-")
    assert out[2] == "blob,blob"


def test_metrics_on_a_truncated_dump(tmp_path, capsys):
    grid = small_grid(40e-3, 3e-3, 5)
    raw, header = write_volume(tmp_path / "cut", gaussian_volume((1e-3, 1e-3, 1e-3), grid), 50.0)
    raw.write_bytes(raw.read_bytes()[:-4])

    code = main(["metrics", str(header), "--output", str(tmp_path / "out")])

    assert code == 2
    assert "volume holds 124 values, header says 125" in capsys.readouterr().err
