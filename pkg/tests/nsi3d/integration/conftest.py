"""Desk-preset fixtures for the end-to-end acceptance runs."""

import pytest

from nsi3d.presets import resolve_config
from nsi3d.runner import ScenarioRunner
from nsi3d.settings import RunSettings


def desk_runner(out, **overrides) -> ScenarioRunner:
    config = resolve_config("desk", None, overrides)
    return ScenarioRunner(config, RunSettings(output_dir=out))


@pytest.fixture(scope="session")
def points_result(tmp_path_factory):
    """Circular-aperture point target at 40 mm, DAS and NSI."""
    out = tmp_path_factory.mktemp("acceptance-points")
    return desk_runner(out, scenario="points", aperture={"kind": "circular"}).run()


@pytest.fixture(scope="session")
def cyst_result(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance-cyst")
    return desk_runner(out, scenario="cyst", aperture={"kind": "circular"}).run()
