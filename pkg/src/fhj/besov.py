"""Littlewood-Paley blocks and Besov norms on the torus grid.

The dyadic profile is built from the smooth bump
``G(x) = exp(-1/(1 - x^2))`` in the variable ``x = log2|xi| - j``:

    F[phi_j](xi) = G(log2|xi| - j) / sum_i G(log2|xi| - i)

so each block lives on 2^{j-1} < |xi| < 2^{j+1} and the blocks sum to one
exactly away from the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
import scipy.fft as sfft
from scipy.special import comb

from .spectral import Field, TorusGrid, _lq, fft_workers, forward_transform

__all__ = [
    "BesovSpec",
    "DyadicPartition",
    "build_partition",
    "dyadic_block",
    "low_block",
    "block_norms",
    "besov_norm",
    "besov_from_blocks",
    "besov_norm_differences",
    "interpolation_ratio",
    "nonlinear_estimate_ratio",
    "pointwise_inequality_check",
    "pointwise_inequality_sides",
    "scaling_check",
    "dilate",
    "AliasingError",
]


class AliasingError(ValueError):
    """Resampled field has significant energy near the Nyquist band."""


@dataclass(frozen=True)
class BesovSpec:
    """Selects B^s_{q,sigma} (inhomogeneous) or its homogeneous version."""

    s: float
    q: float = math.inf
    sigma: float = 1.0
    homogeneous: bool = True

    def __post_init__(self):
        if not self.q >= 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


def _bump(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def _profile(log_xi: np.ndarray, j: int) -> np.ndarray:
    frac = log_xi - np.floor(log_xi)
    total = _bump(frac) + _bump(frac - 1.0)
    return _bump(log_xi - j) / total


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Multiplier bank {F[phi_j]} for j_min..j_max plus the low block F[psi]."""

    grid: TorusGrid
    j_min: int
    j_max: int
    blocks: np.ndarray  # (n_shells, *grid.shape)
    low: np.ndarray  # F[psi] = 1 - sum_{j >= 1} F[phi_j]

    @property
    def js(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    @property
    def n_shells(self) -> int:
        return self.j_max - self.j_min + 1

    def index(self, j: int) -> int:
        if not self.j_min <= j <= self.j_max:
            raise IndexError(f"shell {j} outside [{self.j_min}, {self.j_max}]")
        return j - self.j_min

    def unity_residual(self) -> float:
        """max |sum_j F[phi_j] - 1| over grid wavenumbers in [2^j_min, 2^j_max]."""
        kabs = self.grid.abs_wavenumber
        mask = (kabs >= 2.0**self.j_min) & (kabs <= 2.0**self.j_max)
        return float(np.abs(self.blocks.sum(axis=0)[mask] - 1.0).max())


@lru_cache(maxsize=16)
def build_partition(grid: TorusGrid) -> DyadicPartition:
    """Dyadic partition resolving every nonzero wavenumber of ``grid``.

    j_min = floor(log2(2 pi / L)), j_max = ceil(log2(pi / h)) - 1.
    """
    j_min = math.floor(math.log2(2 * math.pi / grid.period))
    j_max = math.ceil(math.log2(grid.nyquist)) - 1
    if j_max - j_min + 1 < 3:
        raise ValueError(f"grid resolves only {j_max - j_min + 1} dyadic shells (need 3)")
    kabs = grid.abs_wavenumber
    with np.errstate(divide="ignore"):
        log_xi = np.where(kabs > 0, np.log2(np.where(kabs > 0, kabs, 1.0)), -np.inf)
    blocks = np.zeros((j_max - j_min + 1,) + grid.shape)
    nonzero = kabs > 0
    for i, j in enumerate(range(j_min, j_max + 1)):
        blocks[i][nonzero] = _profile(log_xi[nonzero], j)
    high = np.zeros(grid.shape)
    # the low block must also remove the shell above j_max where it touches the grid
    for j in range(1, j_max + 2):
        high[nonzero] += _profile(log_xi[nonzero], j)
    low = 1.0 - high
    blocks.setflags(write=False)
    low.setflags(write=False)
    return DyadicPartition(grid, j_min, j_max, blocks, low)


def _check_grid(f: Field, part: DyadicPartition):
    if f.grid != part.grid:
        raise ValueError("field and partition live on different grids")


def _spatial_axes(grid: TorusGrid) -> tuple[int, ...]:
    return tuple(range(1, grid.dim + 1))


def _all_blocks(f: Field, part: DyadicPartition) -> np.ndarray:
    fh = sfft.fftn(f.samples, workers=fft_workers())
    return sfft.ifftn(part.blocks * fh, axes=_spatial_axes(f.grid), workers=fft_workers()).real


def dyadic_block(f: Field, j: int, part: DyadicPartition) -> Field:
    """phi_j * f."""
    _check_grid(f, part)
    mult = part.blocks[part.index(j)]
    fh = sfft.fftn(f.samples, workers=fft_workers())
    return Field(f.grid, sfft.ifftn(fh * mult, workers=fft_workers()).real)


def low_block(f: Field, part: DyadicPartition) -> Field:
    """psi * f (inhomogeneous low-frequency part, includes the mean)."""
    _check_grid(f, part)
    fh = sfft.fftn(f.samples, workers=fft_workers())
    return Field(f.grid, sfft.ifftn(fh * part.low, workers=fft_workers()).real)


def block_norms(f: Field, q: float, part: DyadicPartition) -> np.ndarray:
    """||phi_j * f||_{L^q} for every shell, ordered by j."""
    _check_grid(f, part)
    blocks = _all_blocks(f, part)
    return _lq(blocks, q, f.grid.cell_volume, axes=_spatial_axes(f.grid))


def besov_from_blocks(norms: np.ndarray, js: np.ndarray, s: float, sigma: float) -> float:
    """l^sigma over j of 2^{js} * norms[j]."""
    weighted = np.exp2(s * np.asarray(js, dtype=float)) * norms
    if np.isinf(sigma):
        return float(weighted.max(initial=0.0))
    if sigma == 1:
        return float(weighted.sum())
    return float((weighted**sigma).sum() ** (1.0 / sigma))


def besov_norm(f: Field, spec: BesovSpec, part: DyadicPartition | None = None) -> float:
    """||f||_{B^s_{q,sigma}} or ||f||_{\\dot B^s_{q,sigma}} on the resolved shells."""
    if part is None:
        part = build_partition(f.grid)
    norms = block_norms(f, spec.q, part)
    if spec.homogeneous:
        return besov_from_blocks(norms, part.js, spec.s, spec.sigma)
    keep = part.js >= 1
    high = besov_from_blocks(norms[keep], part.js[keep], spec.s, spec.sigma)
    low = _lq(low_block(f, part).samples, spec.q, f.grid.cell_volume, axes=None)
    return float(low) + high


def _difference_norms_1d(f: Field, order: int, q: float, max_shift: int) -> np.ndarray:
    """||Delta^order_{n h} f||_q for n = 0..max_shift."""
    x = f.samples
    coef = [(-1) ** (order - i) * comb(order, i, exact=True) for i in range(order + 1)]
    out = np.zeros(max_shift + 1)
    cell = f.grid.cell_volume
    for n in range(1, max_shift + 1):
        d = coef[0] * x
        for i in range(1, order + 1):
            d = d + coef[i] * np.roll(x, -i * n)
        out[n] = _lq(d, q, cell, axes=None)
    return out


def _shift_set_2d(radius: int) -> list[tuple[int, int]]:
    # all lattice vectors for small radii, a ring of directions otherwise
    if radius <= 8:
        r = radius
        return [
            (a, b)
            for a in range(-r, r + 1)
            for b in range(0, r + 1)
            if 0 < a * a + b * b <= r * r and (b > 0 or a > 0)
        ]
    out = set()
    for theta in np.linspace(0, np.pi, 33)[:-1]:
        for frac in (0.5, 0.75, 1.0):
            a = int(round(frac * radius * math.cos(theta)))
            b = int(round(frac * radius * math.sin(theta)))
            if 0 < a * a + b * b <= radius * radius:
                out.add((a, b))
    return sorted(out)


def _difference_norm_2d(f: Field, order: int, q: float, shift: tuple[int, int]) -> float:
    x = f.samples
    d = np.zeros_like(x)
    for i in range(order + 1):
        c = (-1) ** (order - i) * comb(order, i, exact=True)
        d = d + c * np.roll(x, (-i * shift[0], -i * shift[1]), axis=(0, 1))
    return float(_lq(d, q, f.grid.cell_volume, axes=None))


def besov_norm_differences(f: Field, s: float, q: float, sigma: float, order: int | None = None) -> float:
    """Difference characterization of the homogeneous Besov norm.

    Discretizes  { int ( |eta|^{-s} sup_{|y|<=|eta|} ||Delta_y^order f||_q )^sigma
    deta / |eta|^N }^{1/sigma}  with eta on dyadic radii 2^j h (j >= 0, up to
    half the period), the sup taken over grid shifts, and each dyadic
    radius weighted by log 2.  ``order`` defaults to the smallest integer
    above s.
    """
    if order is None:
        order = math.floor(s) + 1
    if not 0 < s < order:
        raise ValueError(f"need 0 < s < order, got s={s}, order={order}")
    grid = f.grid
    n_levels = int(math.log2(grid.points // 2))
    radii = 2 ** np.arange(n_levels + 1)
    if grid.dim == 1:
        diffs = _difference_norms_1d(f, order, q, int(radii[-1]))
        running = np.maximum.accumulate(diffs)
        sups = running[radii]
    else:
        sups = np.zeros(len(radii))
        best = 0.0
        done: set[tuple[int, int]] = set()
        for i, r in enumerate(radii):
            for shift in _shift_set_2d(int(r)):
                if shift not in done:
                    done.add(shift)
                    best = max(best, _difference_norm_2d(f, order, q, shift))
            sups[i] = best
    terms = (radii * grid.spacing) ** (-s) * sups
    if np.isinf(sigma):
        return float(terms.max())
    return float((math.log(2) * (terms**sigma).sum()) ** (1.0 / sigma))


def interpolation_ratio(
    f: Field, s: float, alpha: float, beta: float, q: float, part: DyadicPartition | None = None
) -> float:
    """||f||_{B^s_{q,1}} / (||f||_{B^{s+a}_{q,inf}}^{b/(a+b)} ||f||_{B^{s-b}_{q,inf}}^{a/(a+b)}).

    All norms homogeneous.  Returns nan when the denominator vanishes.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    part = part or build_partition(f.grid)
    norms = block_norms(f, q, part)
    num = besov_from_blocks(norms, part.js, s, 1)
    hi = besov_from_blocks(norms, part.js, s + alpha, math.inf)
    lo = besov_from_blocks(norms, part.js, s - beta, math.inf)
    den = hi ** (beta / (alpha + beta)) * lo ** (alpha / (alpha + beta))
    if den == 0:
        return math.nan
    return num / den


def nonlinear_estimate_ratio(
    f: Field, p: float, s: float, q: float, part: DyadicPartition | None = None
) -> float:
    """|| |f|^p ||_{B^s_{q,1}} / (||f||_{B^0_{inf,1}}^{p-1} ||f||_{B^s_{q,1}}).

    The power is taken pointwise on the grid samples.  Returns nan for a
    vanishing denominator.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0 < s < min(2.0, p):
        raise ValueError(f"need 0 < s < min(2, p), got s={s}")
    part = part or build_partition(f.grid)
    power = f.with_samples(np.abs(f.samples) ** p)
    num = besov_norm(power, BesovSpec(s, q, 1), part)
    den = besov_norm(f, BesovSpec(0, math.inf, 1), part) ** (p - 1) * besov_norm(
        f, BesovSpec(s, q, 1), part
    )
    if den == 0:
        return math.nan
    return num / den


def pointwise_inequality_sides(p: float, A, B, C, D, variant: str = "symmetric"):
    """Left and right sides of the four-point inequality for |.|^p.

    For p >= 2 the last factor is ``|A-C| + |B-D|`` (``variant='symmetric'``).
    ``variant='as_printed'`` uses ``|A-C| + |C-D|`` instead; that form admits
    unbounded ratios (A, C, D -> 0 with B fixed) and is kept for comparison.
    """
    A, B, C, D = (np.asarray(v, dtype=float) for v in (A, B, C, D))
    a = np.abs
    lhs = a(a(A) ** p - a(B) ** p - (a(C) ** p - a(D) ** p))
    rhs = (a(C) ** (p - 1) + a(D) ** (p - 1)) * a(A - B - (C - D))
    if p < 2:
        rhs = rhs + (a(A - C) ** (p - 1) + a(B - D) ** (p - 1)) * a(A - B)
    else:
        if variant == "symmetric":
            second = a(B - D)
        elif variant == "as_printed":
            second = a(C - D)
        else:
            raise ValueError(f"unknown variant {variant!r}")
        powers = sum(a(v) ** (p - 2) for v in (A, B, C, D))
        rhs = rhs + powers * (a(A - C) + second) * a(A - B)
    return lhs, rhs


def pointwise_inequality_check(p: float, tuples: Iterable, variant: str = "symmetric") -> float:
    """Max LHS/RHS over (A, B, C, D) tuples; 0/0 cases are skipped."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    arr = np.asarray(list(tuples) if not isinstance(tuples, np.ndarray) else tuples, dtype=float)
    if arr.size == 0:
        return 0.0
    A, B, C, D = arr.reshape(-1, 4).T
    lhs, rhs = pointwise_inequality_sides(p, A, B, C, D, variant)
    both_zero = (lhs == 0) & (rhs == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(both_zero, 0.0, lhs / rhs)
    return float(ratio.max())


def _trig_eval_1d(coeffs: np.ndarray, k: np.ndarray, points: np.ndarray, chunk: int = 512) -> np.ndarray:
    out = np.empty(points.shape, dtype=complex)
    for start in range(0, points.size, chunk):
        p = points[start : start + chunk]
        out[start : start + chunk] = np.exp(1j * np.outer(p, k)) @ coeffs
    return out


def dilate(u0: Field, lam: float, alias_tol: float = 1e-10) -> Field:
    """Resample x -> u0(lam x) / lam as a function on R^N.

    u0 is read as its trigonometric interpolant inside the box and zero
    outside, so a compactly supported datum must stay inside the box after
    dilation.  Raises AliasingError when the result carries more than
    ``alias_tol`` of its energy in the top half of the resolved band.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if lam == 1:
        return u0
    grid = u0.grid
    m = grid.points
    # symmetric handling of the Nyquist column keeps the interpolant real
    c = sfft.fftn(u0.samples, workers=fft_workers()) / u0.samples.size
    k = grid.axis_wavenumbers.copy()
    # shift phase so the interpolant is evaluated in grid coordinates x = -L/2 + i h
    half = grid.period / 2
    target = lam * grid.axis
    inside = np.abs(target) < half
    phase_pts = target + half
    nyq = m // 2
    if grid.dim == 1:
        c = c.copy()
        c_nyq = c[nyq]
        c[nyq] = 0.0
        vals = _trig_eval_1d(c, k, phase_pts).real + (c_nyq * np.cos(np.pi * m * phase_pts / grid.period)).real
        vals = np.where(inside, vals, 0.0)
    else:
        c = c.copy()
        c[nyq, :] = 0.0
        c[:, nyq] = 0.0
        e = np.exp(1j * np.outer(phase_pts, k))
        vals = (e @ c @ e.T).real
        vals = np.where(inside[:, None] & inside[None, :], vals, 0.0)
    # samples are stored with the grid origin at index M/2
    out = Field(grid, vals / lam)
    _check_alias(out, alias_tol)
    return out


def _check_alias(f: Field, tol: float):
    power = np.abs(forward_transform(f).coeffs) ** 2
    total = power.sum()
    if total == 0:
        return
    high = power[f.grid.abs_wavenumber > 0.5 * f.grid.nyquist].sum()
    if high > tol * total:
        raise AliasingError(f"dilated field has {high / total:.2e} of its energy near Nyquist")


def scaling_check(u0: Field, lam: float, part: DyadicPartition | None = None) -> float:
    """||u0(lam .)/lam||_{B^1_{inf,1}} / ||u0||_{B^1_{inf,1}} (homogeneous)."""
    part = part or build_partition(u0.grid)
    spec = BesovSpec(1.0, math.inf, 1.0)
    base = besov_norm(u0, spec, part)
    if lam == 1:
        return 1.0 if base > 0 else math.nan
    return besov_norm(dilate(u0, lam), spec, part) / base
