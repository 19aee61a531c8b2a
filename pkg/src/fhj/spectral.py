"""Periodic grids, Fourier transforms and exact Fourier multipliers.

The whole space R^N is approximated by the torus [-L/2, L/2)^N sampled on
M points per axis.  Spectral coefficients use the convention
``coeffs = fftn(samples) / M**N`` so that the zero mode is the mean of the
samples and the mass of a field is ``coeffs[0] * L**N``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "TorusGrid",
    "Field",
    "Spectrum",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "gradient",
    "gradient_magnitude",
    "semigroup_apply",
    "lq_norm",
    "fft_workers",
]

HERMITIAN_TOL = 1e-10


def fft_workers() -> int:
    """Thread cap for the FFT backend, read from ``FHJ_THREADS``."""
    value = os.environ.get("FHJ_THREADS")
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the box [-L/2, L/2)^N.

    Args:
        dim: spatial dimension N, 1 or 2.
        points: points per axis M, a power of two with M >= 16.
        period: box side length L.
    """

    dim: int
    points: int
    period: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        m = int(self.points)
        if m != self.points or m < 16 or m & (m - 1):
            raise ValueError(f"points per axis must be a power of two >= 16, got {self.points}")
        if not (np.isfinite(self.period) and self.period > 0):
            raise ValueError(f"period must be positive, got {self.period}")
        object.__setattr__(self, "points", m)
        object.__setattr__(self, "period", float(self.period))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def spacing(self) -> float:
        return self.period / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return self.period**self.dim

    @property
    def nyquist(self) -> float:
        """Largest resolved wavenumber along an axis, pi/h."""
        return np.pi / self.spacing

    @cached_property
    def axis(self) -> np.ndarray:
        # integer offsets keep the grid exactly symmetric about the origin
        return (np.arange(self.points) - self.points // 2) * self.spacing

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        """Wavenumbers 2*pi*m/L in FFT order; the Nyquist entry is -M/2."""
        return 2 * np.pi * sfft.fftfreq(self.points, d=self.spacing)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis_wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def abs_wavenumber(self) -> np.ndarray:
        """|k| on the full spectral grid (Nyquist modes keep their real |k|)."""
        return np.sqrt(sum(k * k for k in self.wavenumbers))

    @cached_property
    def nyquist_mask(self) -> tuple[np.ndarray, ...]:
        """Per axis, True where that axis index is the unpaired Nyquist mode."""
        idx = np.arange(self.points) == self.points // 2
        return tuple(
            np.broadcast_to(idx.reshape([-1 if a == i else 1 for a in range(self.dim)]), self.shape)
            for i in range(self.dim)
        )

    def refined(self, factor: int) -> "TorusGrid":
        return TorusGrid(self.dim, self.points * factor, self.period)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def constant(self, value: float) -> "Field":
        return Field(self, np.full(self.shape, float(value)))

    def sample(self, func: Callable[..., np.ndarray]) -> "Field":
        """Evaluate ``func(*coords)`` on the grid."""
        return Field(self, np.broadcast_to(func(*self.coords), self.shape).astype(float))


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a :class:`TorusGrid`."""

    grid: TorusGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.shape != self.grid.shape:
            raise ValueError(f"samples have shape {arr.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("field contains non-finite samples")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def with_samples(self, samples: np.ndarray) -> "Field":
        return Field(self.grid, samples)

    def __add__(self, other: "Field") -> "Field":
        return self.with_samples(self.samples + _samples_of(other))

    def __sub__(self, other: "Field") -> "Field":
        return self.with_samples(self.samples - _samples_of(other))

    def __mul__(self, scalar: float) -> "Field":
        return self.with_samples(self.samples * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self.with_samples(-self.samples)

    def mass(self) -> float:
        """Rectangle-rule integral h^N * sum(samples)."""
        return float(self.samples.sum() * self.grid.cell_volume)


def _samples_of(other) -> np.ndarray:
    if isinstance(other, Field):
        return other.samples
    return np.asarray(other, dtype=float)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients of a real field, in FFT index order."""

    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            raise ValueError(f"coeffs have shape {arr.shape}, grid expects {self.grid.shape}")
        object.__setattr__(self, "coeffs", arr)

    def hermitian_defect(self) -> float:
        """max |c(m) - conj(c(-m))|, relative to max |c|."""
        flipped = self.coeffs
        for ax in range(self.grid.dim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        scale = max(float(np.abs(self.coeffs).max()), np.finfo(float).tiny)
        return float(np.abs(self.coeffs - np.conj(flipped)).max()) / scale


def forward_transform(f: Field) -> Spectrum:
    if not np.all(np.isfinite(f.samples)):
        raise FloatingPointError("cannot transform non-finite samples")
    n = f.samples.size
    return Spectrum(f.grid, sfft.fftn(f.samples, workers=fft_workers()) / n)


def inverse_transform(spec: Spectrum, check: bool = True) -> Field:
    """Real field from Hermitian coefficients.

    Raises ValueError when the coefficients break Hermitian symmetry beyond
    1e-10 (relative), which means an upstream multiplier was not real-even.
    """
    if check:
        defect = spec.hermitian_defect()
        if defect > HERMITIAN_TOL:
            raise ValueError(f"spectrum is not Hermitian (defect {defect:.3e})")
    n = spec.coeffs.size
    values = sfft.ifftn(spec.coeffs * n, workers=fft_workers())
    return Field(spec.grid, values.real)


def _fft(samples: np.ndarray, axes=None) -> np.ndarray:
    return sfft.fftn(samples, axes=axes, workers=fft_workers())


def _ifft_real(coeffs: np.ndarray, axes=None) -> np.ndarray:
    return sfft.ifftn(coeffs, axes=axes, workers=fft_workers()).real


def apply_multiplier(f: Field, symbol: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> Field:
    """Return F^{-1}[symbol(|k|) * F f].

    ``symbol`` is either a callable of |k| (radial symbol) or an array on the
    spectral grid.  It must be real and finite.
    """
    values = symbol(f.grid.abs_wavenumber) if callable(symbol) else symbol
    values = np.broadcast_to(np.asarray(values), f.grid.shape)
    if np.iscomplexobj(values):
        raise TypeError("multiplier symbol must be real")
    if not np.all(np.isfinite(values)):
        raise ValueError("multiplier symbol is not finite on the grid")
    return Field(f.grid, _ifft_real(_fft(f.samples) * values))


def _derivative_symbols(grid: TorusGrid) -> list[np.ndarray]:
    out = []
    for k, nyq in zip(grid.wavenumbers, grid.nyquist_mask):
        out.append(np.where(nyq, 0.0, 1j * k))
    return out


def gradient(f: Field) -> list[Field]:
    """Spectral partial derivatives, one field per axis.

    The Nyquist mode of the differentiated axis is dropped so the result
    stays real.
    """
    fh = _fft(f.samples)
    return [Field(f.grid, _ifft_real(fh * sym)) for sym in _derivative_symbols(f.grid)]


def gradient_magnitude(f: Field) -> Field:
    """Pointwise Euclidean norm |grad f|."""
    parts = gradient(f)
    return Field(f.grid, np.sqrt(sum(g.samples**2 for g in parts)))


def semigroup_apply(f: Field, t: float) -> Field:
    """Apply the Poisson semigroup exp(-t |k|).  The zero mode is untouched."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    if t == 0:
        return f
    return Field(f.grid, _ifft_real(_fft(f.samples) * np.exp(-t * f.grid.abs_wavenumber)))


def lq_norm(f: Field | np.ndarray, q: float, grid: TorusGrid | None = None) -> float:
    """Discrete L^q norm (sum |f|^q h^N)^(1/q); max |f| for q = inf."""
    if isinstance(f, Field):
        samples, grid = f.samples, f.grid
    else:
        samples = np.asarray(f)
        if grid is None:
            raise TypeError("grid is required for raw arrays")
    return float(_lq(samples, q, grid.cell_volume, axes=None))


def _lq(samples: np.ndarray, q: float, cell: float, axes: Sequence[int] | None) -> np.ndarray:
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    a = np.abs(samples)
    if np.isinf(q):
        return a.max(axis=axes)
    if q == 1:
        return a.sum(axis=axes) * cell
    if q == 2:
        return np.sqrt((a * a).sum(axis=axes) * cell)
    return ((a**q).sum(axis=axes) * cell) ** (1.0 / q)
