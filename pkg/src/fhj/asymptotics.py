"""Mass bookkeeping, power-law fits and convergence to the Poisson profile."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .poisson import sample_kernel
from .solver import Trajectory
from .spectral import Field, gradient_magnitude, lq_norm, semigroup_apply

__all__ = [
    "mass",
    "MassLedger",
    "cstar_estimate",
    "DecayFit",
    "decay_fit",
    "decay_exponent",
    "profile_error",
    "linear_difference",
    "linear_difference_rate",
    "derivative_norm",
]


def mass(f: Field) -> float:
    """Integral of f: h^N times the sum of samples."""
    return f.mass()


@dataclass
class MassLedger:
    """c(t) = M(u0) + int_0^t M(|grad u|^p), and its extrapolated limit."""

    M_u0: float
    times: np.ndarray
    forcing_integral: np.ndarray
    c_of_t: np.ndarray
    C_star: float
    tail: float
    tail_slope: float = math.nan

    @property
    def tail_bound(self) -> np.ndarray:
        """Estimated C* - c(t) at every recorded time."""
        return self.C_star - self.c_of_t


def cstar_estimate(traj: Trajectory, fit_from: float = 0.5, tol: float = 1e-12) -> MassLedger:
    """Build the mass ledger and extrapolate C*.

    The forcing mass M(|grad u|^p) is fitted by a power law on
    [fit_from * T, T] and integrated analytically beyond T; that integral is
    the reported error bar.  A decreasing c(t) (beyond ``tol`` relative)
    means the integrator is broken and raises RuntimeError.
    """
    t = np.asarray(traj.times, dtype=float)
    fint = np.asarray(traj.channels["forcing_integral"], dtype=float)
    fmass = np.asarray(traj.channels["forcing_mass"], dtype=float)
    m0 = float(traj.channels["mass"][0])
    c = m0 + fint
    scale = max(abs(m0), float(np.abs(c).max(initial=0.0)), 1e-300)
    if np.any(np.diff(c) < -tol * scale):
        raise RuntimeError("c(t) decreases: forcing mass went negative")
    tail, slope = 0.0, math.nan
    if np.any(fmass != 0):
        mask = (t >= fit_from * t[-1]) & (fmass > 0) & (t > 0)
        if mask.sum() >= 3:
            slope, icpt = np.polyfit(np.log(t[mask]), np.log(fmass[mask]), 1)
            if slope < -1:
                tail = float(np.exp(icpt) * t[-1] ** (slope + 1) / (-slope - 1))
            else:
                tail = math.inf
        else:
            tail = math.inf
    return MassLedger(m0, t, fint, c, float(c[-1] + tail), tail, float(slope))


@dataclass(frozen=True)
class DecayFit:
    channel: str
    t0: float
    t1: float
    slope: float
    theory: float
    residual: float


def decay_exponent(dim: int, q: float, j: int, r: float = 1.0) -> float:
    """-N(1/r - 1/q) - j."""
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    return -dim * (1.0 / r - inv_q) - j


def decay_fit(series, window, channel: str = "", theory: float = math.nan) -> DecayFit:
    """Least-squares slope of log(value) against log(t) inside ``window``.

    ``series`` is a pair (t, values) or an (n, 2) array.  The residual is
    the RMS of the log-space misfit.  The window must satisfy t1 >= 4 t0.
    """
    if isinstance(series, tuple) and len(series) == 2:
        t, v = (np.asarray(a, dtype=float) for a in series)
    else:
        arr = np.asarray(series, dtype=float)
        t, v = arr[:, 0], arr[:, 1]
    t0, t1 = window
    if not (t0 > 0 and t1 >= 4 * t0):
        raise ValueError(f"window [{t0}, {t1}] must have t0 > 0 and t1 >= 4 t0")
    mask = (t >= t0 * (1 - 1e-12)) & (t <= t1 * (1 + 1e-12))
    if mask.sum() < 2:
        raise ValueError("fewer than two samples inside the window")
    if np.any(v[mask] <= 0):
        raise ValueError("values must be positive inside the window")
    x, y = np.log(t[mask]), np.log(v[mask])
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return DecayFit(channel, float(t0), float(t1), float(slope), float(theory), resid)


def derivative_norm(f: Field, q: float, j: int) -> float:
    """||grad^j f||_{L^q} for j in {0, 1} (Euclidean |grad f| when j = 1)."""
    if j == 0:
        return lq_norm(f, q)
    if j == 1:
        return lq_norm(gradient_magnitude(f), q)
    raise ValueError("j must be 0 or 1")


def _weight_exponent(dim: int, q: float, j: int, r: float) -> float:
    return -decay_exponent(dim, q, j, r)


def profile_error(traj: Trajectory, ledger: MassLedger, q: float, j: int, periodic: bool = True):
    """t^{N(1-1/q)+j} ||grad^j (u(t) - C* P_{t+1})||_q at the snapshot times.

    The periodic Poisson kernel is used by default so the comparison is
    made with the torus analogue of P_{t+1}.
    """
    a = _weight_exponent(traj.grid.dim, q, j, 1.0)
    ts, out = [], []
    for t, u in zip(traj.snapshot_times, traj.fields):
        if t <= 0:
            continue
        prof = sample_kernel(traj.grid, t + 1.0, periodic=periodic) * ledger.C_star
        ts.append(t)
        out.append(t**a * derivative_norm(u - prof, q, j))
    return np.array(ts), np.array(out)


def linear_difference_rate(dim: int, p: float, r: float) -> float:
    """Decay exponent bound for the weighted linear difference (1 < r < inf)."""
    if not 1 < r < math.inf:
        raise ValueError("need 1 < r < inf")
    if p >= r:
        return -dim * (r - 1) / r
    return -dim * (p - 1) / r


def linear_difference(traj: Trajectory, u0: Field, q: float, j: int, r: float):
    """t^{N(1/r-1/q)+j} ||grad^j (u(t) - e^{tL} u0)||_q at the snapshot times."""
    a = _weight_exponent(traj.grid.dim, q, j, r)
    ts, out = [], []
    for t, u in zip(traj.snapshot_times, traj.fields):
        if t <= 0:
            continue
        ts.append(t)
        out.append(t**a * derivative_norm(u - semigroup_apply(u0, float(t)), q, j))
    return np.array(ts), np.array(out)
