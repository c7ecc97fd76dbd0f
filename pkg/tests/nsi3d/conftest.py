"""Shared fixtures for nsi3d tests."""

from __future__ import annotations

import numpy as np
import pytest

from nsi3d.imaging.aperture_design import (
    circular_mask,
    fermat_spiral_ideal,
    no_reuse_select,
    nsi_windows,
    quantize_to_grid,
)
from nsi3d.imaging.array_geometry import build_matrix_array
from nsi3d.imaging.tx_sequence import build_plan, virtual_sources
from nsi3d.models.acquisition import Pulse


@pytest.fixture(scope="session")
def geom():
    """The default 1024-element probe with blank rows 9, 17 and 25."""
    return build_matrix_array()


@pytest.fixture(scope="session")
def circular(geom):
    return circular_mask(geom)


@pytest.fixture(scope="session")
def circular_apod(circular):
    return nsi_windows(circular)


@pytest.fixture(scope="session")
def spiral(geom):
    return quantize_to_grid(fermat_spiral_ideal(), geom)


@pytest.fixture(scope="session")
def spiral_no_reuse(geom):
    return no_reuse_select(fermat_spiral_ideal(), geom)


@pytest.fixture(scope="session")
def pulse():
    return Pulse()


@pytest.fixture(scope="session")
def center_source():
    """Straight-ahead virtual source, 17.4 mm behind the array."""
    return virtual_sources()[0]


@pytest.fixture(scope="session")
def circular_plan(circular, geom):
    return build_plan(circular, geom)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

