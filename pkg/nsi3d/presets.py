"""Named scale presets for experiment configurations."""

from __future__ import annotations

import copy
from typing import Any

from nsi3d.exceptions import ConfigurationError
from nsi3d.schemas.experiment import ExperimentConfig, deep_merge

_DESK: dict[str, Any] = {
    "preset": "desk",
    "grid": {
        "x_range_mm": (-12.0, 12.0),
        "y_range_mm": (-12.0, 12.0),
        "z_range_mm": (25.0, 55.0),
        "dims": (64, 64, 96),
    },
    "phantom": {
        "point_depths_mm": [40.0],
        "box_mm": (20.0, 20.0, 20.0),
        "box_center_mm": (0.0, 0.0, 40.0),
    },
}

# Extents of the full study: five points from 20 to 60 mm and the 40x40x30 mm cyst box.
_FULL: dict[str, Any] = {
    "preset": "full",
    "grid": {
        "x_range_mm": (-20.0, 20.0),
        "y_range_mm": (-20.0, 20.0),
        "z_range_mm": (15.0, 65.0),
        "dims": None,
        "spacing_mm": None,
    },
    "phantom": {
        "point_depths_mm": [20.0, 30.0, 40.0, 50.0, 60.0],
        "box_mm": (40.0, 40.0, 30.0),
        "box_center_mm": (0.0, 0.0, 40.0),
    },
}

PRESETS: dict[str, dict[str, Any]] = {"desk": _DESK, "full": _FULL}


def preset_data(name: str) -> dict[str, Any]:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigurationError(
            f"unknown preset, expected one of {sorted(PRESETS)}", field="preset", value=name
        ) from None


def get_preset(name: str) -> ExperimentConfig:
    return ExperimentConfig.model_validate(preset_data(name))


def resolve_config(
    preset: str | None = None,
    file_data: dict[str, Any] | None = None,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Preset, then config file, then command-line overrides; later layers win.

    Without an explicit preset the config file's `preset` key picks one,
    falling back to `desk`.
    """
    file_data = file_data or {}
    overrides = overrides or {}
    name = overrides.get("preset") or preset or file_data.get("preset") or "desk"
    merged = deep_merge(preset_data(name), file_data)
    merged = deep_merge(merged, overrides)
    merged["preset"] = name
    return ExperimentConfig.model_validate(merged)
