"""Experiment configuration: what to simulate, reconstruct and measure.

Distances are given in millimetres, frequencies in hertz.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from nsi3d.exceptions import ConfigurationError

Scenario = Literal["points", "cyst", "beampattern"]
ApertureChoice = Literal["circular", "spiral", "spiral_no_reuse", "rectangular", "all"]
PresetName = Literal["desk", "full"]
Range = tuple[float, float]
Triple = tuple[float, float, float]


class ApertureConfig(BaseModel):
    """Aperture layout and NSI window parameters."""

    kind: ApertureChoice = "circular"
    dc: float = Field(default=1.0, gt=0)
    zm_outer_sign: Literal[1, -1] = 1
    r_out_pitches: float = Field(default=16.0, gt=0)
    r_in_pitches: float = Field(default=11.5, ge=0)
    n_spiral: int = Field(default=256, gt=0)
    sigma_d: float = Field(default=0.7, gt=0)
    max_candidate_pitches: float = Field(default=2.0, gt=0)
    rect_inner_size: int = Field(default=22, ge=0, lt=32)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def validate_radii(self) -> "ApertureConfig":
        if self.r_in_pitches >= self.r_out_pitches:
            raise ValueError("r_in_pitches must be smaller than r_out_pitches")
        return self


class GridConfig(BaseModel):
    """Voxel grid; `dims` wins over `spacing_mm`, which defaults to half a wavelength."""

    x_range_mm: Range = (-12.0, 12.0)
    y_range_mm: Range = (-12.0, 12.0)
    z_range_mm: Range = (25.0, 55.0)
    dims: tuple[int, int, int] | None = (64, 64, 96)
    spacing_mm: float | None = Field(default=None, gt=0)

    model_config = ConfigDict(extra="forbid")

    @field_validator("x_range_mm", "y_range_mm", "z_range_mm")
    @classmethod
    def validate_range_order(cls, value: Range) -> Range:
        if value[1] < value[0]:
            raise ValueError("range upper bound is below its lower bound")
        return value

    @field_validator("z_range_mm")
    @classmethod
    def validate_in_front(cls, value: Range) -> Range:
        if value[0] <= 0:
            raise ValueError("voxels must lie in front of the array (z > 0)")
        return value

    @field_validator("dims")
    @classmethod
    def validate_dims(cls, value: tuple[int, int, int] | None) -> tuple[int, int, int] | None:
        if value is not None and min(value) < 1:
            raise ValueError("grid dims must be at least 1")
        return value


class PhantomConfig(BaseModel):
    """Point targets and the speckle/cyst phantom."""

    point_depths_mm: list[float] = Field(default_factory=lambda: [40.0])
    box_mm: Triple = (20.0, 20.0, 20.0)
    box_center_mm: Triple = (0.0, 0.0, 40.0)
    cyst_center_mm: Triple = (0.0, 0.0, 40.0)
    cyst_diameter_mm: float = Field(default=10.0, gt=0)
    density: float = Field(default=20.0, gt=0)
    inside_amp_ratio: float = Field(default=0.2, ge=0)
    noise_std: float = Field(default=0.0, ge=0)

    model_config = ConfigDict(extra="forbid")

    @field_validator("point_depths_mm")
    @classmethod
    def validate_depths(cls, value: list[float]) -> list[float]:
        if any(d <= 0 for d in value):
            raise ValueError("point depths must be positive")
        return value


class SequenceConfig(BaseModel):
    """Diverging-wave transmit geometry and timing."""

    tilt_deg: float = Field(default=5.0, ge=0)
    standoff_mm: float = Field(default=17.4, gt=0)
    depth_mm: float = Field(default=70.0, gt=0)
    sound_speed: float = Field(default=1540.0, gt=0)

    model_config = ConfigDict(extra="forbid")


class PulseConfig(BaseModel):
    center_frequency_hz: float = Field(default=3.0e6, gt=0)
    fractional_bandwidth: float = Field(default=0.70, gt=0, le=2.0)
    sampling_rate_hz: float = Field(default=12e6, gt=0)
    oversample: int = Field(default=4, ge=1)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def validate_nyquist(self) -> "PulseConfig":
        upper = self.center_frequency_hz * (1 + self.fractional_bandwidth / 2)
        if self.sampling_rate_hz <= 2 * upper:
            raise ValueError("sampling rate is below twice the pulse's upper band edge")
        return self


class ImagingConfig(BaseModel):
    """Reconstruction, display and beampattern settings."""

    compound: Literal["coherent", "incoherent"] = "coherent"
    dynamic_range_db: float = Field(default=50.0, gt=0)
    beampattern_depth_mm: float = Field(default=40.0, gt=0)
    beampattern_half_angle_deg: float = Field(default=20.0, gt=0, lt=90)
    beampattern_points: int = Field(default=121, ge=3)
    c_plane_depth_mm: float | None = Field(default=None, gt=0)

    model_config = ConfigDict(extra="forbid")


class ExperimentConfig(BaseModel):
    """One reproducible scenario run."""

    scenario: Scenario = "points"
    preset: PresetName = "desk"
    seed: int = Field(default=0, ge=0)
    output_dir: str | None = None
    aperture: ApertureConfig = Field(default_factory=ApertureConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    phantom: PhantomConfig = Field(default_factory=PhantomConfig)
    sequence: SequenceConfig = Field(default_factory=SequenceConfig)
    pulse: PulseConfig = Field(default_factory=PulseConfig)
    imaging: ImagingConfig = Field(default_factory=ImagingConfig)

    model_config = ConfigDict(extra="forbid")


def dump_config(config: ExperimentConfig) -> str:
    """Canonical JSON text of a configuration."""
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def read_config_data(path: str | Path) -> dict[str, Any]:
    """Raw mapping from a JSON config file, for merging over a preset."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc.strerror}", field="config",
                                 value=str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"config is not valid JSON: {exc.msg} at line {exc.lineno}",
            field="config",
            value=str(path),
        ) from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object", field="config",
                                 value=str(path))
    return data


def load_config(path: str | Path) -> ExperimentConfig:
    return ExperimentConfig.model_validate(read_config_data(path))


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON, ignoring where outputs are written."""
    data = config.model_dump(mode="json", exclude={"output_dir"})
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Nested dict merge; values in `overrides` win."""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged
