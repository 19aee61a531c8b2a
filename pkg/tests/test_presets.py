from __future__ import annotations

import numpy as np
import pytest

from fhj.presets import PRESETS, critical_norm, preset_initial_data
from fhj.spectral import TorusGrid


@pytest.fixture(scope="module")
def grid():
    return TorusGrid(1, 4096, 400.0)


@pytest.mark.parametrize("name", ["bump", "gauss-like", "dipole"])
@pytest.mark.parametrize("amp", [0.01, 1.0])
def test_amplitude_normalization(grid, name, amp):
    u = preset_initial_data(name, grid, amp)
    assert critical_norm(u) == pytest.approx(amp, rel=1e-8)


def test_dipole_has_zero_mass(grid):
    assert abs(preset_initial_data("dipole", grid, 1.0).mass()) < 1e-12


def test_dipole_2d_zero_mass():
    g = TorusGrid(2, 128, 20.0)
    assert abs(preset_initial_data("dipole", g, 1.0, radius=3.0).mass()) < 1e-12


def test_poisson_preset_has_unit_mass(grid):
    assert preset_initial_data("poisson", grid).mass() == pytest.approx(1.0, abs=1e-12)


def test_bump_is_compactly_supported(grid):
    u = preset_initial_data("bump", grid, 0.01, radius=2.0)
    assert np.all(u.samples[np.abs(grid.axis) >= 2.0] == 0.0)
    assert np.all(u.samples >= 0)


def test_raw_profile_and_errors(grid):
    raw = preset_initial_data("bump", grid)
    assert raw.samples.max() == pytest.approx(np.exp(-1.0))
    with pytest.raises(ValueError, match="unknown preset"):
        preset_initial_data("square", grid, 1.0)
    with pytest.raises(ValueError):
        preset_initial_data("bump", grid, -1.0)
    assert set(PRESETS) == {"bump", "gauss-like", "poisson", "dipole"}
