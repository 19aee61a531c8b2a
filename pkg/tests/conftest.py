from __future__ import annotations

import numpy as np
import pytest

from fhj.spectral import TorusGrid

# criterion id -> (passed, detail); filled by the acceptance module
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def grid1d() -> TorusGrid:
    return TorusGrid(1, 256, 2 * np.pi * 8)


@pytest.fixture
def grid2d() -> TorusGrid:
    return TorusGrid(2, 64, 2 * np.pi * 4)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


def band_limited_field(grid: TorusGrid, rng: np.random.Generator, k_lo: float, k_hi: float):
    """Random real field with a smooth log-Gaussian spectral envelope inside [k_lo, k_hi]."""
    from fhj.spectral import Field

    kabs = grid.abs_wavenumber
    center = rng.uniform(np.log(k_lo) + 0.5, np.log(k_hi) - 0.5)
    width = rng.uniform(0.3, 0.8)
    env = np.zeros(grid.shape)
    band = (kabs >= k_lo) & (kabs <= k_hi)
    env[band] = np.exp(-((np.log(kabs[band]) - center) ** 2) / (2 * width**2))
    noise = rng.standard_normal(grid.shape)
    spec = np.fft.fftn(noise) / noise.size * env
    f = Field(grid, np.real(np.fft.ifftn(spec * noise.size)))
    return f * (1.0 / np.abs(f.samples).max())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def reference_grid() -> TorusGrid:
    return TorusGrid(1, 8192, 800.0)


@pytest.fixture(scope="session")
def small_data_run(reference_grid):
    """Nonlinear run of the small-data preset: p=2, bump with B^1_{inf,1} norm 0.01, T=50."""
    from fhj.presets import preset_initial_data
    from fhj.solver import SolverConfig, evolve

    u0 = preset_initial_data("bump", reference_grid, 0.01)
    cfg = SolverConfig(p=2.0, T=50.0, dt=0.05, grid=reference_grid, snapshot_times=(1.0, 5.0, 50.0))
    return u0, cfg, evolve(u0, cfg)
