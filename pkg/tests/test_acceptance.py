"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py``; the lines are printed in
the terminal summary (and inline with ``-s``).
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE, band_limited_field
from fhj.asymptotics import cstar_estimate, decay_fit, derivative_norm, profile_error
from fhj.besov import (
    BesovSpec,
    besov_norm,
    besov_norm_differences,
    build_partition,
    pointwise_inequality_check,
    pointwise_inequality_sides,
    scaling_check,
)
from fhj.poisson import kernel_identity_check, sample_kernel, zero_mean_decay_check
from fhj.presets import preset_initial_data
from fhj.solver import SolverConfig, XYNormSpec, linear_trajectory, picard_iterate, self_convergence
from fhj.spectral import TorusGrid, lq_norm

# corpus-wide Besov equivalence constant for the seed-7 corpus, frozen as a regression value
FROZEN_C_EQ = 3.6407753491388513


def record(cid: int, ok: bool, detail: str):
    ACCEPTANCE[cid] = (bool(ok), detail)
    print(f"criterion {cid:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_01_poisson_normalization():
    grid = TorusGrid(1, 4096, 400.0)
    err = abs(lq_norm(sample_kernel(grid, 1.0, periodic=True), 1) - 1.0)
    # truncation of the open-space profile at fixed spacing h = 400/4096
    open_errs = [
        abs(lq_norm(sample_kernel(TorusGrid(1, 4096 * 2**i, 400.0 * 2**i), 1.0), 1) - 1.0) for i in range(3)
    ]
    monotone = all(a > b for a, b in zip(open_errs, open_errs[1:]))
    detail = f"torus |1-||P1||_1|={err:.2e}; open-space errors under L-doubling {', '.join(f'{e:.2e}' for e in open_errs)}"
    record(1, err <= 1e-3 and monotone, detail)


def test_02_semigroup_identity():
    grid = TorusGrid(1, 4096, 400.0)
    errs = [kernel_identity_check(grid, 1.0, t, periodic=True) for t in (1.0, 5.0, 20.0)]
    record(2, max(errs) <= 1e-6, "Linf errors at t=1,5,20: " + ", ".join(f"{e:.2e}" for e in errs))


def test_03_linear_decay_rates(reference_grid):
    u0 = preset_initial_data("bump", reference_grid, 0.01)
    traj = linear_trajectory(u0, np.linspace(5.0, 50.0, 91))
    cases = [(math.inf, 0), (math.inf, 1), (2.0, 0)]
    ok, parts = True, []
    for q, j in cases:
        series = [derivative_norm(f, q, j) for f in traj.fields]
        slope = decay_fit((traj.times, series), (5.0, 50.0)).slope
        theory = -1 * (1 - (0 if math.isinf(q) else 1 / q)) - j
        ok &= abs(slope - theory) <= 0.05
        parts.append(f"(q={q:g},j={j}) {slope:.4f} vs {theory:g}")
    record(3, ok, "; ".join(parts))


def test_04_zero_mean_l1_decay(reference_grid):
    u0 = preset_initial_data("dipole", reference_grid, 1.0)
    times = np.geomspace(1.0, 100.0, 25)
    norms = zero_mean_decay_check(u0, times)
    ratio = norms[-1] / norms[0]
    monotone = bool(np.all(np.diff(norms) < 0))
    record(4, ratio <= 0.1 and monotone, f"||.||_1(100)/||.||_1(1)={ratio:.4f}, monotone={monotone}")


def test_05_besov_equivalence():
    grid = TorusGrid(1, 4096, 400.0)
    part = build_partition(grid)
    lo, hi = 2.0 ** (part.j_min + 2), 2.0 ** (part.j_max - 2)
    ratios = []
    for s, q in ((1.0, math.inf), (0.5, 2.0)):
        rng = np.random.default_rng(7)
        for _ in range(20):
            f = band_limited_field(grid, rng, lo, hi)
            ratios.append(besov_norm(f, BesovSpec(s, q, 1.0), part) / besov_norm_differences(f, s, q, 1.0))
    ratios = np.array(ratios)
    c_eq = float(max(ratios.max(), 1 / ratios.min()))
    ok = c_eq <= 5 and c_eq == pytest.approx(FROZEN_C_EQ, rel=1e-9)
    record(5, ok, f"ratios in [{ratios.min():.3f}, {ratios.max():.3f}], C_eq={c_eq:.4f} (frozen {FROZEN_C_EQ:.4f})")


def _inequality_tuples(rng, n):
    # mix generic, clustered and near-degenerate tuples
    base = rng.standard_normal((n, 4)) * np.exp(rng.uniform(-3, 3, (n, 1)))
    k = n // 4
    base[:k, 2] = base[:k, 0] + 1e-3 * rng.standard_normal(k)
    base[k : 2 * k, 3] = base[k : 2 * k, 1] + 1e-3 * rng.standard_normal(k)
    base[2 * k : 3 * k, [0, 2]] *= 1e-4
    return base


def test_06_pointwise_inequality():
    rng = np.random.default_rng(2024)
    ok, parts = True, []
    for p in (1.5, 2.0, 3.0):
        tuples = _inequality_tuples(rng, 100_000)
        worst = pointwise_inequality_check(p, tuples)
        a, b = rng.standard_normal((2, 1000))
        lhs, _ = pointwise_inequality_sides(p, a, b, a, b)
        ok &= math.isfinite(worst) and worst <= 10 and bool(np.all(lhs == 0))
        parts.append(f"p={p:g} max ratio {worst:.3f}")
    record(6, ok, "; ".join(parts) + "; identity tuples give LHS=0")


def test_07_contraction(reference_grid):
    cfg = SolverConfig(p=2.0, T=20.0, dt=0.05, grid=reference_grid)
    amps = (0.01, 0.1, 0.5, 1.0)
    table = []
    for a in amps:
        res = picard_iterate(preset_initial_data("bump", reference_grid, a), cfg, 6, XYNormSpec(p=2.0))
        table.append(res.ratios[:4])  # n = 2..5
    table = np.array(table)
    small_ok = bool(np.all(table[0] < 0.5))
    monotone = bool(np.all(np.diff(table, axis=0) > 0))
    detail = f"ratios at amp 0.01: {', '.join(f'{r:.4f}' for r in table[0])}; max ratio per amp: " + ", ".join(
        f"{a:g}->{m:.3f}" for a, m in zip(amps, table.max(axis=1))
    )
    record(7, small_ok and monotone, detail + f"; increasing in amplitude: {monotone}")


def test_08_mass_ledger(small_data_run):
    _, _, traj = small_data_run
    ch = traj.channels
    resid = np.abs(ch["mass"] - ch["mass"][0] - ch["forcing_integral"])
    scaled = float((resid / (1 + np.abs(ch["mass"]))).max())
    c = ch["mass"][0] + ch["forcing_integral"]
    nondecreasing = bool(np.all(np.diff(c) >= 0))
    record(8, scaled <= 1e-6 and nondecreasing, f"max scaled residual {scaled:.2e}, c(t) nondecreasing={nondecreasing}")


def test_09_nonlinear_decay(small_data_run):
    _, _, traj = small_data_run
    g = decay_fit(traj.channel("grad_linf"), (5.0, 50.0)).slope
    u = decay_fit(traj.channel("linf"), (5.0, 50.0)).slope
    ok = abs(g + 2) <= 0.1 and abs(u + 1) <= 0.1
    record(9, ok, f"slope ||grad u||_inf {g:.4f}, ||u||_inf {u:.4f}")


def test_10_profile_convergence(small_data_run):
    _, _, traj = small_data_run
    ledger = cstar_estimate(traj)
    ok, parts = True, []
    for q in (1.0, math.inf):
        ts, series = profile_error(traj, ledger, q, 0)
        e5 = series[np.argmin(np.abs(ts - 5.0))]
        e50 = series[np.argmin(np.abs(ts - 50.0))]
        ok &= e5 >= 5 * e50
        parts.append(f"q={q:g} decrease x{e5 / e50:.2f}")
    record(10, ok, "; ".join(parts) + f"; C*={ledger.C_star:.7f} (+tail {ledger.tail:.1e})")


def test_11_scaling_invariance():
    grid = TorusGrid(1, 4096, 400.0)
    part = build_partition(grid)
    ok, parts = True, []
    for radius in (32.0, 48.0):
        u0 = preset_initial_data("bump", grid, 0.01, radius=radius)
        ok &= scaling_check(u0, 1.0, part) == 1.0
        for lam in (0.5, 2.0, 4.0):
            r = scaling_check(u0, lam, part)
            ok &= 1 / 3 <= r <= 3
            parts.append(f"R={radius:g},lam={lam:g}: {r:.4f}")
    record(11, ok, "; ".join(parts) + "; lam=1 exact")


def test_12_convergence_orders(reference_grid):
    u0 = preset_initial_data("bump", reference_grid, 0.01)
    dts = [0.2, 0.1, 0.05, 0.025]
    ok, parts = True, []
    for scheme, order in (("exponential-euler", 1), ("exponential-midpoint", 2)):
        cfg = SolverConfig(p=2.0, T=1.0, dt=0.1, grid=reference_grid, scheme=scheme)
        h, err = self_convergence(u0, cfg, dts)
        slope = float(np.polyfit(np.log(h), np.log(err), 1)[0])
        ok &= abs(slope - order) <= 0.2
        parts.append(f"{scheme} slope {slope:.3f} (order {order})")
    record(12, ok, "; ".join(parts))
