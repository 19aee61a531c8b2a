"""Exponential integrators and Picard iteration for the mild equation

    u(t) = e^{tL} u0 + int_0^t e^{(t-s)L} |grad u(s)|^p ds,    L = -(-Delta)^{1/2}.

The linear part is applied exactly through its Fourier multiplier; only the
forcing integral is approximated.  State is kept as unnormalized FFT
coefficients on the base grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .besov import BesovSpec, besov_from_blocks, block_norms, build_partition
from .spectral import Field, TorusGrid, _lq, fft_workers

__all__ = [
    "SolverConfig",
    "Trajectory",
    "XYNormSpec",
    "BlowUpError",
    "nonlinearity",
    "phi1",
    "evolve",
    "linear_trajectory",
    "picard_iterate",
    "PicardResult",
    "x_norm",
    "y_norm",
    "snapshot_steps",
    "self_convergence",
    "estimate_discretization_error",
]

logger = logging.getLogger(__name__)

SCHEMES = ("exponential-euler", "exponential-midpoint")
CHANNELS = ("l1", "l2", "linf", "grad_linf", "besov_1_inf_1", "mass", "forcing_mass", "forcing_integral")


class BlowUpError(RuntimeError):
    """Raised when the gradient grows past the guard or turns non-finite."""

    def __init__(self, t: float, value: float, limit: float):
        super().__init__(f"blow-up guard tripped at t={t:.6g}: ||grad u||_inf={value:.6g} > {limit:.6g}")
        self.t = t
        self.value = value
        self.limit = limit


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.

    ``dt`` is shrunk if needed so that T is an integer number of steps.
    ``linear=True`` drops the forcing (pure semigroup run).
    ``snapshot_times`` are extra times (rounded to steps) that are always
    stored; ``max_dense`` and ``n_log`` shape the default snapshot schedule.
    """

    p: float
    T: float
    dt: float
    grid: TorusGrid
    oversample: int = 2
    scheme: str = "exponential-euler"
    linear: bool = False
    snapshot_times: tuple[float, ...] = ()
    max_dense: int = 64
    n_log: int = 64
    blowup_factor: float = 1e6

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        if self.dt > self.T:
            raise ValueError(f"dt={self.dt} exceeds T={self.T}")
        if self.oversample not in (2, 4):
            raise ValueError(f"oversample must be 2 or 4, got {self.oversample}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.T / self.dt - 1e-9))

    @property
    def step(self) -> float:
        return self.T / self.n_steps


@dataclass(frozen=True)
class XYNormSpec:
    """Parameters of the time-space norms used for the contraction metric."""

    p: float
    q: float = math.inf
    r: float = 1.0
    s: float | None = None
    lam: float | None = None
    eps: float | None = None

    def __post_init__(self):
        lam = (self.p - 1) / self.p if self.lam is None else self.lam
        eps = min(1.0, self.p - 1) / 2 if self.eps is None else self.eps
        if not 0 < lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {lam}")
        if not 0 < eps < min(1.0, self.p - 1):
            raise ValueError(f"epsilon must lie in (0, min(1, p-1)), got {eps}")
        if not 1 <= self.r <= self.q:
            raise ValueError("need 1 <= r <= q")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "s", lam if self.s is None else self.s)


@dataclass
class Trajectory:
    """Diagnostics on every step plus field snapshots on a strided subset."""

    grid: TorusGrid
    times: np.ndarray
    channels: dict[str, np.ndarray]
    snapshot_times: np.ndarray
    fields: list[Field]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, t in (("times", self.times), ("snapshot_times", self.snapshot_times)):
            if len(t) > 1 and np.any(np.diff(t) <= 0):
                raise ValueError(f"{name} must be strictly increasing")

    def field_at(self, t: float, tol: float = 1e-9) -> Field:
        i = int(np.argmin(np.abs(self.snapshot_times - t)))
        if abs(self.snapshot_times[i] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}")
        return self.fields[i]

    def channel(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        return self.times, self.channels[name]


def phi1(dt: float, kabs: np.ndarray) -> np.ndarray:
    """(1 - e^{-dt|k|}) / |k|, equal to dt at k = 0."""
    out = np.full(kabs.shape, float(dt))
    nz = kabs > 0
    out[nz] = -np.expm1(-dt * kabs[nz]) / kabs[nz]
    return out


def _phi2(dt: float, kabs: np.ndarray) -> np.ndarray:
    # int_0^dt e^{-(dt-s)|k|} (s/dt) ds; dt/2 at k = 0
    x = dt * kabs
    out = np.empty(kabs.shape)
    small = x < 1e-3
    xs = x[small]
    out[small] = dt * (0.5 - xs / 6 + xs**2 / 24 - xs**3 / 120)
    xl = x[~small]
    out[~small] = dt * (xl + np.expm1(-xl)) / xl**2
    return out


class _Spectral:
    """Precomputed index maps and symbols for one grid and oversampling."""

    def __init__(self, grid: TorusGrid, oversample: int):
        self.grid = grid
        self.factor = oversample
        m = grid.points
        mo = m * oversample
        self.n_base = m**grid.dim
        self.big_shape = (mo,) * grid.dim
        self.scale = float(oversample**grid.dim)
        src = np.r_[0 : m // 2, m // 2 + 1 : m]
        dst = np.r_[0 : m // 2, mo - m // 2 + 1 : mo]
        self.src = np.ix_(*([src] * grid.dim))
        self.dst = np.ix_(*([dst] * grid.dim))
        self.dsym = [np.where(nyq, 0.0, 1j * k) for k, nyq in zip(grid.wavenumbers, grid.nyquist_mask)]
        self.kabs = grid.abs_wavenumber
        self.workers = fft_workers()

    def fft(self, x):
        return sfft.fftn(x, workers=self.workers)

    def ifft(self, x):
        return sfft.ifftn(x, workers=self.workers).real

    def grad_big(self, uh: np.ndarray) -> list[np.ndarray]:
        out = []
        for sym in self.dsym:
            big = np.zeros(self.big_shape, dtype=complex)
            big[self.dst] = (uh * sym)[self.src] * self.scale
            out.append(sfft.ifftn(big, workers=self.workers).real)
        return out

    def truncate(self, big_samples: np.ndarray) -> np.ndarray:
        bh = sfft.fftn(big_samples, workers=self.workers)
        out = np.zeros(self.grid.shape, dtype=complex)
        out[self.src] = bh[self.dst] / self.scale
        return out

    def nonlinear_hat(self, uh: np.ndarray, p: float) -> np.ndarray:
        grads = self.grad_big(uh)
        sq = sum(g * g for g in grads)
        if p == 2:
            power = sq
        else:
            power = sq ** (p / 2)
        return self.truncate(power)

    def mass_of_hat(self, fh: np.ndarray) -> float:
        return float(fh.flat[0].real / self.n_base * self.grid.volume)


def nonlinearity(u: Field, p: float, oversample: int = 2) -> Field:
    """|grad u|^p evaluated on the oversampled grid and low-passed back."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    sp = _Spectral(u.grid, oversample)
    nh = sp.nonlinear_hat(sp.fft(u.samples), p)
    values = sp.ifft(nh)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("nonlinearity produced non-finite values")
    return Field(u.grid, values)


def snapshot_steps(n_steps: int, max_dense: int = 64, n_log: int = 64, extra: Sequence[int] = ()) -> np.ndarray:
    """Every step up to ``max_dense`` snapshots, log-spaced afterwards."""
    dense = np.arange(min(n_steps, max_dense - 1) + 1)
    steps = set(dense.tolist())
    if n_steps > dense[-1]:
        logs = np.geomspace(max(dense[-1], 1), n_steps, n_log)
        steps.update(int(round(s)) for s in logs)
    steps.add(n_steps)
    steps.update(int(e) for e in extra if 0 <= e <= n_steps)
    return np.array(sorted(steps))


def _requested_steps(cfg: SolverConfig) -> list[int]:
    return [int(round(t / cfg.step)) for t in cfg.snapshot_times]


class _Diagnostics:
    def __init__(self, sp: _Spectral, p: float):
        self.sp = sp
        self.p = p
        self.part = build_partition(sp.grid)
        self.rows: list[list[float]] = []

    def record(self, uh: np.ndarray, forcing_mass: float, forcing_integral: float) -> dict[str, float]:
        sp, grid = self.sp, self.sp.grid
        u = sp.ifft(uh)
        grads = [sp.ifft(uh * sym) for sym in sp.dsym]
        gmag = np.sqrt(sum(g * g for g in grads))
        cell = grid.cell_volume
        blocks = sfft.ifftn(self.part.blocks * uh, axes=tuple(range(1, grid.dim + 1)), workers=sp.workers).real
        bnorm = besov_from_blocks(_lq(blocks, math.inf, cell, axes=tuple(range(1, grid.dim + 1))), self.part.js, 1.0, 1.0)
        row = {
            "l1": float(_lq(u, 1, cell, None)),
            "l2": float(_lq(u, 2, cell, None)),
            "linf": float(np.abs(u).max()),
            "grad_linf": float(gmag.max()),
            "besov_1_inf_1": bnorm,
            "mass": float(u.sum() * cell),
            "forcing_mass": forcing_mass,
            "forcing_integral": forcing_integral,
        }
        self.rows.append([row[c] for c in CHANNELS])
        return row

    def channels(self) -> dict[str, np.ndarray]:
        arr = np.array(self.rows, dtype=float).reshape(-1, len(CHANNELS))
        return {name: arr[:, i].copy() for i, name in enumerate(CHANNELS)}


def evolve(u0: Field, cfg: SolverConfig, record: bool = True) -> Trajectory:
    """Integrate the mild equation from u0 up to cfg.T.

    exponential-euler:    u+ = E u + phi1(dt) N(u)
    exponential-midpoint: v = E_half u + phi1(dt/2) N(u);  u+ = E u + phi1(dt) N(v)

    Channel ``forcing_integral`` accumulates dt * M(applied forcing), so
    ``mass - mass[0] - forcing_integral`` vanishes up to rounding.
    Raises BlowUpError when ||grad u||_inf exceeds ``blowup_factor`` times
    its initial value.
    """
    if u0.grid != cfg.grid:
        raise ValueError("initial field is not on the configured grid")
    sp = _Spectral(cfg.grid, cfg.oversample)
    dt = cfg.step
    n_steps = cfg.n_steps
    E = np.exp(-dt * sp.kabs)
    P1 = phi1(dt, sp.kabs)
    if cfg.scheme == "exponential-midpoint":
        E_half = np.exp(-0.5 * dt * sp.kabs)
        P1_half = phi1(0.5 * dt, sp.kabs)
    keep = set(snapshot_steps(n_steps, cfg.max_dense, cfg.n_log, _requested_steps(cfg)).tolist())
    diag = _Diagnostics(sp, cfg.p)

    uh = sp.fft(u0.samples)
    integral = 0.0
    snaps: list[Field] = []
    snap_t: list[float] = []
    guard = None

    def forcing(vh):
        if cfg.linear:
            return np.zeros_like(vh)
        nh = sp.nonlinear_hat(vh, cfg.p)
        return nh

    for n in range(n_steps + 1):
        t = n * dt
        nh = forcing(uh)
        fmass = sp.mass_of_hat(nh)
        if record or n in keep:
            row = diag.record(uh, fmass, integral)
            g = row["grad_linf"]
            if guard is None:
                guard = cfg.blowup_factor * max(g, np.finfo(float).tiny)
            if not np.isfinite(g) or g > guard:
                raise BlowUpError(t, g, guard)
        if n in keep:
            snaps.append(Field(cfg.grid, sp.ifft(uh)))
            snap_t.append(t)
        if n == n_steps:
            break
        if cfg.scheme == "exponential-euler":
            applied = nh
        else:
            vh = E_half * uh + P1_half * nh
            applied = forcing(vh)
        uh = E * uh + P1 * applied
        integral += dt * sp.mass_of_hat(applied)
        if not np.all(np.isfinite(uh)):
            raise BlowUpError(t + dt, math.inf, guard or math.inf)

    times = np.arange(n_steps + 1) * dt if record else np.array(snap_t)
    return Trajectory(
        grid=cfg.grid,
        times=times,
        channels=diag.channels(),
        snapshot_times=np.array(snap_t),
        fields=snaps,
        meta={"p": cfg.p, "dt": dt, "scheme": cfg.scheme, "linear": cfg.linear, "oversample": cfg.oversample},
    )


def linear_trajectory(u0: Field, times: Sequence[float]) -> Trajectory:
    """Exact semigroup snapshots e^{tL} u0 at the given times."""
    sp = _Spectral(u0.grid, 2)
    uh = sp.fft(u0.samples)
    diag = _Diagnostics(sp, 2.0)
    fields = []
    times = np.asarray(times, dtype=float)
    for t in times:
        vh = uh * np.exp(-t * sp.kabs)
        diag.record(vh, 0.0, 0.0)
        fields.append(Field(u0.grid, sp.ifft(vh)))
    return Trajectory(u0.grid, times.copy(), diag.channels(), times.copy(), fields, meta={"linear": True})


# ---------------------------------------------------------------------------
# Picard iteration


@dataclass
class PicardResult:
    iterates: list[Trajectory]
    distances: list[float]
    diverged: bool

    @property
    def ratios(self) -> list[float]:
        d = self.distances
        return [d[i + 1] / d[i] if d[i] > 0 else math.nan for i in range(1, len(d) - 1)]

    def __iter__(self):
        return iter(zip(self.iterates, self.distances))

    def __len__(self):
        return len(self.iterates)


def _space_time_besov(sp: _Spectral, part, uh_rows: np.ndarray, q: float) -> np.ndarray:
    """Block L^q norms for a stack of spectral states: shape (n_times, n_shells)."""
    axes = tuple(range(1, sp.grid.dim + 1))
    out = []
    for uh in uh_rows:
        blocks = sfft.ifftn(part.blocks * uh, axes=axes, workers=sp.workers).real
        out.append(_lq(blocks, q, sp.grid.cell_volume, axes=axes))
    return np.array(out)


def _x_norm_from_blocks(times: np.ndarray, norms: np.ndarray, js: np.ndarray, s: float) -> float:
    w0 = np.exp2(s * js)
    w1 = np.exp2((s + 1) * js)
    sup_term = float((norms * w0).sum(axis=1).max(initial=0.0))
    integral = float(np.trapezoid((norms * w1).sum(axis=1), times)) if len(times) > 1 else 0.0
    return sup_term + integral


def picard_iterate(u0: Field, cfg: SolverConfig, n_iter: int, spec: XYNormSpec) -> PicardResult:
    """Picard sequence u_1 = e^{tL}u0, u_n = Psi(u_{n-1}) on the step grid.

    The Duhamel integral uses the same exponential quadrature as ``evolve``:
    left-point rule for exponential-euler (its fixed point is the Euler
    trajectory) and the exponential trapezoid rule otherwise.  Distances are
    d(u_n, u_{n-1}) = ||.||_{X^eps_r} + ||.||_{X^eps_inf} over the snapshot
    times; the first entry is nan.  Three consecutive distance increases
    flag divergence (logged, not raised).
    """
    if n_iter < 2:
        raise ValueError("n_iter must be at least 2")
    if u0.grid != cfg.grid:
        raise ValueError("initial field is not on the configured grid")
    sp = _Spectral(cfg.grid, cfg.oversample)
    part = build_partition(cfg.grid)
    js = part.js.astype(float)
    dt = cfg.step
    n_steps = cfg.n_steps
    kabs = sp.kabs
    E = np.exp(-dt * kabs)
    P1 = phi1(dt, kabs)
    P2 = _phi2(dt, kabs)
    times = np.arange(n_steps + 1) * dt
    keep = snapshot_steps(n_steps, cfg.max_dense, cfg.n_log, _requested_steps(cfg))

    u0h = sp.fft(u0.samples)
    current = u0h[None, ...] * np.exp(-times.reshape((-1,) + (1,) * cfg.grid.dim) * kabs)

    def to_traj(states, label):
        fields = [Field(cfg.grid, sp.ifft(states[i])) for i in keep]
        return Trajectory(
            cfg.grid, times[keep].copy(), {}, times[keep].copy(), fields, meta={"iterate": label, "dt": dt}
        )

    iterates = [to_traj(current, 1)]
    distances = [math.nan]
    increases = 0
    diverged = False
    for it in range(2, n_iter + 1):
        forcing = np.array([sp.nonlinear_hat(current[n], cfg.p) for n in range(n_steps + 1)])
        nxt = np.empty_like(current)
        nxt[0] = u0h
        for n in range(n_steps):
            if cfg.scheme == "exponential-euler":
                inc = P1 * forcing[n]
            else:
                inc = (P1 - P2) * forcing[n] + P2 * forcing[n + 1]
            nxt[n + 1] = E * nxt[n] + inc
        if not np.all(np.isfinite(nxt)):
            logger.warning("Picard iterate %d is not finite; stopping", it)
            diverged = True
            break
        diff = (nxt - current)[keep]
        d = 0.0
        for q in (spec.r, math.inf):
            norms = _space_time_besov(sp, part, diff, q)
            d += _x_norm_from_blocks(times[keep], norms, js, spec.eps)
        if len(distances) > 1 and d > distances[-1]:
            increases += 1
            if increases >= 3:
                diverged = True
                logger.warning("Picard distances grew three times in a row (iterate %d)", it)
        else:
            increases = 0
        distances.append(d)
        iterates.append(to_traj(nxt, it))
        current = nxt
    return PicardResult(iterates, distances, diverged)


# ---------------------------------------------------------------------------
# time-space norms


def _besov_series(traj: Trajectory, s_values: Sequence[float], q: float) -> list[np.ndarray]:
    part = build_partition(traj.grid)
    rows = np.array([block_norms(f, q, part) for f in traj.fields]).reshape(len(traj.fields), -1)
    js = part.js.astype(float)
    return [(rows * np.exp2(s * js)).sum(axis=1) for s in s_values]


def _tail(times: np.ndarray, values: np.ndarray) -> float:
    # extrapolate int_T^inf by a power law fitted on the last half of the run
    t_end = times[-1]
    mask = (times >= t_end / 2) & (values > 0) & (times > 0)
    if mask.sum() < 3:
        return 0.0 if values[-1] == 0 else math.inf
    slope, icpt = np.polyfit(np.log(times[mask]), np.log(values[mask]), 1)
    if slope >= -1:
        return math.inf
    return float(np.exp(icpt) * t_end ** (slope + 1) / (-slope - 1))


def x_norm(traj: Trajectory, s: float, q: float, with_tail: bool = False) -> float:
    """sup_t ||u(t)||_{B^s_{q,1}} + int_0^T ||u(t)||_{B^{s+1}_{q,1}} dt over the snapshots.

    ``with_tail`` adds a power-law extrapolation of the integral beyond T.
    """
    lo, hi = _besov_series(traj, (s, s + 1), q)
    t = traj.snapshot_times
    value = float(lo.max(initial=0.0))
    if len(t) > 1:
        value += float(np.trapezoid(hi, t))
        if with_tail:
            value += _tail(t, hi)
    return value


def y_norm(traj: Trajectory, spec: XYNormSpec, with_tail: bool = False, parts: bool = False):
    """X^s_q norm plus the time-weighted sup of ||u||_{B^1_{q,1}} and the
    time-weighted integral of ||u||_{B^2_{q,1}}; weight t^{N(1/r-1/q)+1-s}.

    With ``parts=True`` returns (x_part, weighted_sup, weighted_integral).
    """
    N = traj.grid.dim
    inv_q = 0.0 if math.isinf(spec.q) else 1.0 / spec.q
    a = N * (1.0 / spec.r - inv_q) + 1.0 - spec.s
    t = traj.snapshot_times
    b1, b2 = _besov_series(traj, (1.0, 2.0), spec.q)
    w = t**a
    wsup = float((w * b1).max(initial=0.0))
    wint = float(np.trapezoid(w * b2, t)) if len(t) > 1 else 0.0
    if with_tail and len(t) > 1:
        wint += _tail(t, w * b2)
    xp = x_norm(traj, spec.s, spec.q, with_tail=with_tail)
    if parts:
        return xp, wsup, wint
    return xp + wsup + wint


# ---------------------------------------------------------------------------
# step-size studies


def self_convergence(u0: Field, cfg: SolverConfig, dts: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Errors ||u_dt(T) - u_{dt/2}(T)||_inf for each dt; returns (dts, errors)."""
    from dataclasses import replace

    dts = np.asarray(dts, dtype=float)
    errors = []
    for dt in dts:
        a = evolve(u0, replace(cfg, dt=dt), record=False).fields[-1]
        b = evolve(u0, replace(cfg, dt=dt / 2), record=False).fields[-1]
        errors.append(float(np.abs(a.samples - b.samples).max()))
    return dts, np.array(errors)


def estimate_discretization_error(u0: Field, cfg: SolverConfig) -> float:
    """Richardson estimate of the final-time L^inf error of ``evolve``."""
    from dataclasses import replace

    order = 1 if cfg.scheme == "exponential-euler" else 2
    fine = evolve(u0, cfg, record=False).fields[-1]
    coarse = evolve(u0, replace(cfg, dt=2 * cfg.step), record=False).fields[-1]
    return float(np.abs(fine.samples - coarse.samples).max()) / (2**order - 1)
