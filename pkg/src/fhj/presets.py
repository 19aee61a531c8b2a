"""Named initial data families, normalized in the critical norm."""

from __future__ import annotations

import numpy as np

from .besov import BesovSpec, besov_norm
from .poisson import sample_kernel
from .spectral import Field, TorusGrid

__all__ = ["PRESETS", "preset_initial_data", "bump_profile", "critical_norm"]

PRESETS = ("bump", "gauss-like", "poisson", "dipole")

CRITICAL = BesovSpec(s=1.0, q=np.inf, sigma=1.0)


def bump_profile(grid: TorusGrid, radius: float = 1.0) -> Field:
    """exp(-1/(1 - |x/R|^2)) inside the ball of radius R, zero outside."""
    rho2 = (grid.radius / radius) ** 2
    out = np.zeros(grid.shape)
    inside = rho2 < 1
    out[inside] = np.exp(-1.0 / (1.0 - rho2[inside]))
    return Field(grid, out)


def _dipole(grid: TorusGrid, radius: float) -> Field:
    # d/dx_1 of the bump, taken analytically so the samples are exactly odd
    rho2 = (grid.radius / radius) ** 2
    x1 = grid.coords[0]
    out = np.zeros(grid.shape)
    inside = rho2 < 1
    w = 1.0 - rho2[inside]
    out[inside] = -2.0 * x1[inside] / (radius**2 * w**2) * np.exp(-1.0 / w)
    return Field(grid, out)


def critical_norm(f: Field) -> float:
    """Homogeneous B^1_{inf,1} norm."""
    return besov_norm(f, CRITICAL)


def preset_initial_data(name: str, grid: TorusGrid, amplitude: float | None = None, radius: float = 1.0) -> Field:
    """Build a named initial datum.

    bump: compactly supported smooth bump of radius ``radius``.
    gauss-like: exp(-|x/R|^2).
    poisson: the periodic Poisson kernel at scale 1 (mass one).
    dipole: x_1-derivative of the bump (odd, zero mass).

    When ``amplitude`` is given the field is rescaled so its homogeneous
    B^1_{inf,1} norm equals it; ``None`` returns the raw profile.
    """
    if name == "bump":
        f = bump_profile(grid, radius)
    elif name == "gauss-like":
        f = grid.sample(lambda *x: np.exp(-sum(c * c for c in x) / radius**2))
    elif name == "poisson":
        f = sample_kernel(grid, 1.0, periodic=True)
    elif name == "dipole":
        f = _dipole(grid, radius)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if amplitude is None:
        return f
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    norm = critical_norm(f)
    return f * (amplitude / norm)
