"""The Poisson kernel P_t(x) = c_N t (t^2 + |x|^2)^{-(N+1)/2}.

Two samplings are offered.  ``periodic=False`` evaluates the whole-space
closed form on the box and simply drops the algebraic tail.  ``periodic=True``
returns the image sum over the lattice L Z^N, which is the kernel of
``exp(-t|k|)`` on the torus: it has mass exactly one and obeys the semigroup
law exactly on the grid.  Torus comparisons against the simulator must use
the periodic form; the open form is the reference object on R^N.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import integrate

from .spectral import Field, TorusGrid, lq_norm, semigroup_apply

__all__ = [
    "PoissonProfile",
    "normalization_constant",
    "poisson_profile",
    "sample_kernel",
    "kernel_identity_check",
    "zero_mean_decay_check",
]

_IMAGE_SHELLS_2D = 6


@lru_cache(maxsize=None)
def normalization_constant(dim: int) -> float:
    """c_N such that c_N * int (1+|x|^2)^{-(N+1)/2} dx = 1.

    Computed by adaptive Gauss-Kronrod quadrature of the defining integral
    (polar coordinates for N = 2).
    """
    if dim == 1:
        half, _ = integrate.quad(lambda x: 1.0 / (1.0 + x * x), 0.0, np.inf, epsabs=0, epsrel=1e-13)
        total = 2.0 * half
    elif dim == 2:
        radial, _ = integrate.quad(
            lambda r: r * (1.0 + r * r) ** -1.5, 0.0, np.inf, epsabs=0, epsrel=1e-13
        )
        total = 2.0 * np.pi * radial
    else:
        raise ValueError(f"dimension must be 1 or 2, got {dim}")
    return 1.0 / total


class PoissonProfile:
    """P_t for a fixed dimension and scale, callable on coordinate arrays."""

    def __init__(self, dim: int, t: float):
        if not t > 0:
            raise ValueError(f"Poisson scale must be positive, got {t}")
        self.dim = dim
        self.t = float(t)
        self.c_N = normalization_constant(dim)

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        r2 = sum(np.asarray(c, dtype=float) ** 2 for c in coords)
        t = self.t
        return self.c_N * t * (t * t + r2) ** (-(self.dim + 1) / 2)

    def __repr__(self):
        return f"PoissonProfile(dim={self.dim}, t={self.t})"


def poisson_profile(dim: int, t: float) -> PoissonProfile:
    return PoissonProfile(dim, t)


def _periodic_1d(x: np.ndarray, t: float, period: float) -> np.ndarray:
    # closed-form image sum: (1/L) sinh(a) / (cosh(a) - cos(b)), a = 2 pi t/L, b = 2 pi x/L
    a = 2 * np.pi * t / period
    b = 2 * np.pi * x / period
    denom = 2.0 * (np.sinh(a / 2) ** 2 + np.sin(b / 2) ** 2)
    return np.sinh(a) / denom / period


def _square_mass_2d(t: float, half_side: float) -> float:
    # mass of the 2D Poisson kernel inside [-a, a]^2 (solid-angle formula)
    a = half_side
    return 2.0 / np.pi * np.arctan(a * a / (t * np.sqrt(t * t + 2 * a * a)))


def _periodic_2d(x: np.ndarray, y: np.ndarray, t: float, period: float) -> np.ndarray:
    prof = PoissonProfile(2, t)
    n = _IMAGE_SHELLS_2D
    out = np.zeros(np.broadcast(x, y).shape)
    for i in range(-n, n + 1):
        for j in range(-n, n + 1):
            out += prof(x + i * period, y + j * period)
    # far images are nearly uniform over the cell: add their mass evenly
    captured = _square_mass_2d(t, (n + 0.5) * period)
    return out + (1.0 - captured) / period**2


def sample_kernel(grid: TorusGrid, t: float, periodic: bool = False) -> Field:
    """P_t sampled on the grid.

    ``periodic=False`` gives the open-space formula (self-similar, tail
    truncated by the box).  ``periodic=True`` gives the torus kernel.
    """
    if not t > 0:
        raise ValueError(f"Poisson scale must be positive, got {t}")
    if not periodic:
        return grid.sample(PoissonProfile(grid.dim, t))
    if grid.dim == 1:
        return Field(grid, _periodic_1d(grid.axis, t, grid.period))
    x, y = grid.coords
    return Field(grid, _periodic_2d(x, y, t, grid.period))


def kernel_identity_check(grid: TorusGrid, s: float, t: float, periodic: bool = True) -> float:
    """L-infinity distance between exp(t L) P_s and P_{s+t} on the grid."""
    if not (s > 0 and t >= 0):
        raise ValueError("need s > 0 and t >= 0")
    p_s = sample_kernel(grid, s, periodic=periodic)
    if t == 0:
        return 0.0
    evolved = semigroup_apply(p_s, t)
    return lq_norm(evolved - sample_kernel(grid, s + t, periodic=periodic), np.inf)


def zero_mean_decay_check(f: Field, times, tol: float = 1e-10) -> np.ndarray:
    """L^1 norms of exp(t L) f for a mass-free field f.

    The mass tolerance is relative to ``max(1, ||f||_1)``.
    """
    scale = max(1.0, lq_norm(f, 1))
    if abs(f.mass()) > tol * scale:
        raise ValueError(f"field has nonzero mass {f.mass():.3e}")
    return np.array([lq_norm(semigroup_apply(f, float(t)), 1) for t in times])
