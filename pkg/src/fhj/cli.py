"""Command line front end: ``fhj <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid input (one-line reason on stderr),
3 numerical abort (blow-up guard).
"""

from __future__ import annotations

import argparse
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .asymptotics import cstar_estimate, decay_exponent, decay_fit, profile_error
from .besov import BesovSpec, block_norms, build_partition, scaling_check
from .io import read_csv, read_manifest, read_snapshot, write_csv, write_manifest, write_snapshot
from .presets import PRESETS, critical_norm, preset_initial_data
from .solver import CHANNELS, BlowUpError, SolverConfig, Trajectory, XYNormSpec, evolve, picard_iterate
from .spectral import Field, TorusGrid

DIAGNOSTIC_COLUMNS = ("t", "l1", "l2", "linf", "grad_linf", "besov_1_inf_1", "mass", "forcing_mass")

DEFAULTS = {
    "dim": 1,
    "M": 4096,
    "L": 400.0,
    "u0": "preset:bump",
    "amp": None,
    "radius": 1.0,
    "dt": 0.05,
    "scheme": "exponential-euler",
    "oversample": 2,
    "out": None,
    "iters": 6,
    "snapshot_format": "binary",
    "max_dense": 64,
    "n_log": 64,
    "s": 1.0,
    "q": math.inf,
    "sigma": 1.0,
    "inhomogeneous": False,
    "t0": 5.0,
    "t1": 50.0,
    "family": "amplitude",
    "values": None,
}

# value parsers for keys that may come from a config file
_TYPES = {
    "dim": int,
    "M": int,
    "L": float,
    "radius": float,
    "p": float,
    "T": float,
    "dt": float,
    "amp": str,
    "oversample": int,
    "iters": int,
    "max_dense": int,
    "n_log": int,
    "s": float,
    "q": float,
    "sigma": float,
    "t0": float,
    "t1": float,
    "inhomogeneous": lambda v: str(v).lower() in ("1", "true", "yes"),
}


class UsageError(Exception):
    """Invalid flags or inputs; reported as exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, timed: bool = True):
    add = p.add_argument
    add("--config", help="key = value file; flags override it")
    add("--dim", type=int, help="spatial dimension N (1 or 2)")
    add("--M", type=int, help="grid points per axis")
    add("--L", type=float, help="box side length")
    add("--u0", help="snapshot file or preset:<name>")
    add("--amp", help="rescale u0 to this B^1_{inf,1} norm ('raw' keeps it)")
    add("--radius", type=float, help="length scale of the bump, gauss-like and dipole presets")
    add("--out", help="output directory")
    if timed:
        add("--p", type=float, help="nonlinearity exponent p > 1")
        add("--T", type=float, help="final time")
        add("--dt", type=float, help="time step")
        add("--scheme", choices=("exponential-euler", "exponential-midpoint"))
        add("--oversample", type=int, choices=(2, 4))
        add("--max-dense", dest="max_dense", type=int, help="snapshots stored at every step")
        add("--n-log", dest="n_log", type=int, help="log-spaced snapshots afterwards")
        add("--snapshot-format", dest="snapshot_format", choices=("binary", "text"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fhj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fhj {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("simulate", help="integrate the nonlinear equation"))
    pc = sub.add_parser("picard", help="Picard iteration with contraction distances")
    _common(pc)
    pc.add_argument("--iters", type=int, help="number of iterates (>= 2)")
    _common(sub.add_parser("linear", help="pure semigroup run"))

    pb = sub.add_parser("besov", help="per-shell Besov report for u0")
    _common(pb, timed=False)
    pb.add_argument("action", nargs="?", default="report", choices=("report",))
    pb.add_argument("--s", type=float)
    pb.add_argument("--q", type=float)
    pb.add_argument("--sigma", type=float)
    pb.add_argument("--inhomogeneous", action="store_true", default=None)

    pa = sub.add_parser("asymptotics", help="post-process a simulate run directory")
    pa.add_argument("run", help="run directory written by simulate")
    pa.add_argument("--config")
    pa.add_argument("--out", help="output directory (default: the run directory)")
    pa.add_argument("--t0", type=float, help="start of the fit window")
    pa.add_argument("--t1", type=float, help="end of the fit window")

    ps = sub.add_parser("sweep", help="amplitude or scaling families")
    _common(ps)
    ps.add_argument("--family", choices=("amplitude", "scaling"))
    ps.add_argument("--values", help="comma-separated amplitudes or lambdas")
    ps.add_argument("--iters", type=int)
    return parser


def _merge(args: argparse.Namespace) -> dict:
    """defaults < config file < flags."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        for key, raw in read_manifest(path).items():
            if "." in key or key in ("command", "run", "action"):
                continue
            if key not in _TYPES and key not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r} in {path}")
            try:
                opts[key] = _TYPES.get(key, str)(raw)
            except ValueError:
                raise UsageError(f"bad value for {key!r} in {path}: {raw!r}") from None
    for key, value in vars(args).items():
        if value is not None and key != "config":
            opts[key] = value
    return opts


def _require(opts: dict, *keys: str):
    for key in keys:
        if opts.get(key) is None:
            raise UsageError(f"missing required flag --{key}")


def _grid(opts: dict) -> TorusGrid:
    try:
        return TorusGrid(int(opts["dim"]), int(opts["M"]), float(opts["L"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _amplitude(opts: dict, name: str | None) -> float | None:
    raw = opts.get("amp")
    if raw is None:
        return None if name in (None, "poisson") else 0.01
    if str(raw).lower() in ("raw", "none"):
        return None
    try:
        value = float(raw)
    except ValueError:
        raise UsageError(f"--amp must be a number or 'raw', got {raw!r}") from None
    if not (np.isfinite(value) and value >= 0):
        raise UsageError(f"--amp must be finite and nonnegative, got {raw}")
    return value


def load_initial_data(opts: dict) -> Field:
    spec = str(opts["u0"])
    if spec.startswith("preset:"):
        name = spec.split(":", 1)[1]
        if name not in PRESETS:
            raise UsageError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        radius = float(opts["radius"])
        if not radius > 0:
            raise UsageError(f"--radius must be positive, got {radius}")
        return preset_initial_data(name, _grid(opts), _amplitude(opts, name), radius=radius)
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"initial data file not found: {path}")
    f, _ = read_snapshot(path)
    amp = _amplitude(opts, None)
    return f if amp is None else f * (amp / critical_norm(f))


def _solver_config(opts: dict, grid: TorusGrid, linear: bool = False) -> SolverConfig:
    try:
        return SolverConfig(
            p=float(opts["p"]) if not linear else 2.0,
            T=float(opts["T"]),
            dt=float(opts["dt"]),
            grid=grid,
            oversample=int(opts["oversample"]),
            scheme=str(opts["scheme"]),
            linear=linear,
            max_dense=int(opts["max_dense"]),
            n_log=int(opts["n_log"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _outdir(opts: dict) -> Path:
    out = Path(opts["out"] or "run")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, opts: dict, grid: TorusGrid, outputs: list[str], started: float):
    entries = {"command": command}
    echo = opts.get("_flags", set(opts))
    for key in sorted(echo):
        value = opts.get(key)
        if value is None or key in ("command", "run", "action", "config", "_flags"):
            continue
        entries[key] = value
    entries["grid.spacing"] = grid.spacing
    entries["grid.nyquist"] = grid.nyquist
    entries["version.fhj"] = __version__
    entries["version.python"] = platform.python_version()
    entries["version.numpy"] = np.__version__
    entries["version.scipy"] = scipy.__version__
    entries["run.wall_clock_s"] = round(time.perf_counter() - started, 3)
    entries["run.outputs"] = sorted(outputs)
    write_manifest(out / "manifest.txt", entries)


def _write_trajectory(out: Path, traj: Trajectory, fmt: str) -> list[str]:
    ch = traj.channels
    rows = zip(traj.times, *(ch[c] for c in DIAGNOSTIC_COLUMNS[1:]))
    write_csv(out / "diagnostics.csv", DIAGNOSTIC_COLUMNS, rows)
    c = ch["mass"][0] + ch["forcing_integral"]
    resid = ch["mass"] - c
    write_csv(
        out / "ledger.csv",
        ("t", "mass", "forcing_integral", "c_of_t", "residual"),
        zip(traj.times, ch["mass"], ch["forcing_integral"], c, resid),
    )
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    ext = "bin" if fmt == "binary" else "txt"
    index = []
    for i, (t, f) in enumerate(zip(traj.snapshot_times, traj.fields)):
        name = f"snap_{i:05d}.{ext}"
        write_snapshot(snap_dir / name, f, t, binary=(fmt == "binary"))
        index.append((i, t, name))
    write_csv(snap_dir / "index.csv", ("index", "t", "file"), index)
    return ["diagnostics.csv", "ledger.csv", "snapshots/index.csv"]


def _linear_fits(traj: Trajectory, t0: float, t1: float):
    dim = traj.grid.dim
    specs = (("l2", 2.0, 0), ("linf", math.inf, 0), ("grad_linf", math.inf, 1))
    t0, t1 = _window(traj.times[-1], t0, t1)
    rows = []
    for name, q, j in specs:
        try:
            fit = decay_fit(traj.channel(name), (t0, t1), name, decay_exponent(dim, q, j))
        except ValueError:
            continue
        rows.append((fit.channel, fit.t0, fit.t1, fit.slope, fit.theory, fit.residual))
    return rows


def _window(T: float, t0: float, t1: float) -> tuple[float, float]:
    t1 = min(t1, T)
    if t1 < 4 * t0:
        t0 = t1 / 10
    return t0, t1


def cmd_simulate(opts: dict, linear: bool = False) -> int:
    started = time.perf_counter()
    if not linear:
        _require(opts, "p")
    _require(opts, "T")
    grid = _grid(opts)
    u0 = load_initial_data(opts)
    cfg = _solver_config(opts, u0.grid, linear=linear)
    out = _outdir(opts)
    traj = evolve(u0, cfg)
    outputs = _write_trajectory(out, traj, opts["snapshot_format"])
    if linear:
        write_csv(
            out / "decay_fits.csv",
            ("channel", "t0", "t1", "slope", "theory", "residual"),
            _linear_fits(traj, opts["t0"], opts["t1"]),
        )
        outputs.append("decay_fits.csv")
    _manifest(out, "linear" if linear else "simulate", opts, grid, outputs + ["manifest.txt"], started)
    return 0


def cmd_picard(opts: dict) -> int:
    started = time.perf_counter()
    _require(opts, "p", "T")
    grid = _grid(opts)
    u0 = load_initial_data(opts)
    cfg = _solver_config(opts, u0.grid)
    if int(opts["iters"]) < 2:
        raise UsageError("--iters must be at least 2")
    try:
        spec = XYNormSpec(p=cfg.p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = picard_iterate(u0, cfg, int(opts["iters"]), spec)
    out = _outdir(opts)
    write_csv(out / "contraction.csv", ("n", "distance", "ratio"), _contraction_rows(res.distances))
    _manifest(out, "picard", opts, grid, ["contraction.csv", "manifest.txt"], started)
    return 0


def _contraction_rows(distances):
    rows = []
    for n, d in enumerate(distances, start=1):
        prev = distances[n - 2] if n >= 2 else math.nan
        ratio = d / prev if n >= 3 and prev > 0 else math.nan
        rows.append((n, d, ratio))
    return rows


def cmd_besov(opts: dict) -> int:
    started = time.perf_counter()
    grid = _grid(opts)
    u0 = load_initial_data(opts)
    try:
        spec = BesovSpec(float(opts["s"]), float(opts["q"]), float(opts["sigma"]), not opts["inhomogeneous"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    part = build_partition(u0.grid)
    norms = block_norms(u0, spec.q, part)
    js = part.js
    rows = [(int(j), n, 2.0 ** (spec.s * j) * n) for j, n in zip(js, norms)]
    out = _outdir(opts)
    write_csv(out / "besov_report.csv", ("j", "block_lq_norm", "weighted_term"), rows)
    _manifest(out, "besov", opts, grid, ["besov_report.csv", "manifest.txt"], started)
    return 0


def load_run(run: Path) -> tuple[Trajectory, dict[str, str]]:
    """Rebuild a trajectory from a simulate/linear run directory."""
    man_path = run / "manifest.txt"
    if not man_path.is_file():
        raise UsageError(f"no manifest.txt in {run}")
    man = read_manifest(man_path)
    diag = read_csv(run / "diagnostics.csv")
    ledger = read_csv(run / "ledger.csv")
    index = read_csv(run / "snapshots" / "index.csv")
    fields = []
    for name in index["file"]:
        f, _ = read_snapshot(run / "snapshots" / str(name))
        fields.append(f)
    grid = fields[0].grid if fields else TorusGrid(int(man["dim"]), int(man["M"]), float(man["L"]))
    channels = {c: diag[c] for c in DIAGNOSTIC_COLUMNS[1:]}
    channels["forcing_integral"] = ledger["forcing_integral"]
    missing = [c for c in CHANNELS if c not in channels]
    if missing:
        raise UsageError(f"run directory lacks channels: {', '.join(missing)}")
    traj = Trajectory(grid, diag["t"], channels, np.asarray(index["t"], dtype=float), fields, meta=dict(man))
    return traj, man


def cmd_asymptotics(opts: dict) -> int:
    run = Path(opts["run"])
    if not run.is_dir():
        raise UsageError(f"run directory not found: {run}")
    traj, man = load_run(run)
    out = Path(opts["out"]) if opts["out"] else run
    out.mkdir(parents=True, exist_ok=True)
    ledger = cstar_estimate(traj)
    write_csv(
        out / "cstar.csv",
        ("t", "c_of_t", "tail_bound"),
        zip(ledger.times, ledger.c_of_t, ledger.tail_bound),
    )
    write_csv(out / "decay_fits.csv", ("channel", "t0", "t1", "slope", "theory", "residual"), _linear_fits(traj, opts["t0"], opts["t1"]))
    rows = []
    for q in (1.0, math.inf):
        for j in (0, 1):
            ts, errs = profile_error(traj, ledger, q, j)
            rows += [(t, q, j, e) for t, e in zip(ts, errs)]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    write_csv(out / "profile_error.csv", ("t", "q", "j", "weighted_error"), rows)
    return 0


def cmd_sweep(opts: dict) -> int:
    started = time.perf_counter()
    grid = _grid(opts)
    family = opts["family"]
    if opts["values"] is None:
        values = [0.01, 0.1, 0.5, 1.0] if family == "amplitude" else [0.5, 2.0, 4.0]
    else:
        try:
            values = [float(v) for v in str(opts["values"]).split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"--values must be comma-separated numbers, got {opts['values']!r}") from None
    out = _outdir(opts)
    if family == "amplitude":
        _require(opts, "p", "T")
        rows, summary = [], []
        for amp in values:
            u0 = load_initial_data(dict(opts, amp=amp))
            cfg = _solver_config(opts, u0.grid)
            res = picard_iterate(u0, cfg, int(opts["iters"]), XYNormSpec(p=cfg.p))
            for n, d, r in _contraction_rows(res.distances):
                rows.append((amp, n, d, r))
            ratios = [r for r in res.ratios if np.isfinite(r)]
            summary.append((amp, max(ratios) if ratios else math.nan, int(res.diverged)))
        write_csv(out / "sweep_amplitude.csv", ("amplitude", "n", "distance", "ratio"), rows)
        write_csv(out / "sweep_summary.csv", ("amplitude", "max_ratio", "diverged"), summary)
        outputs = ["sweep_amplitude.csv", "sweep_summary.csv"]
    else:
        u0 = load_initial_data(opts)
        part = build_partition(u0.grid)
        rows = []
        for lam in values:
            try:
                rows.append((lam, scaling_check(u0, lam, part)))
            except ValueError as exc:
                raise UsageError(f"lambda={lam}: {exc}") from None
        write_csv(out / "sweep_scaling.csv", ("lambda", "ratio"), rows)
        outputs = ["sweep_scaling.csv"]
    _manifest(out, "sweep", opts, grid, outputs + ["manifest.txt"], started)
    return 0


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = _merge(args)
        opts["_flags"] = set(vars(args))
        command = opts.pop("command")
        if command == "simulate":
            return cmd_simulate(opts)
        if command == "linear":
            return cmd_simulate(opts, linear=True)
        if command == "picard":
            return cmd_picard(opts)
        if command == "besov":
            return cmd_besov(opts)
        if command == "asymptotics":
            return cmd_asymptotics(opts)
        return cmd_sweep(opts)
    except UsageError as exc:
        print(f"fhj: error: {exc}", file=sys.stderr)
        return 2
    except (BlowUpError, FloatingPointError) as exc:
        print(f"fhj: aborted: {exc}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError) as exc:
        print(f"fhj: error: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
