"""Snapshot files, fixed-format CSV and key = value manifests."""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spectral import Field, TorusGrid

__all__ = [
    "format_number",
    "write_csv",
    "read_csv",
    "write_snapshot",
    "read_snapshot",
    "write_manifest",
    "read_manifest",
]

MAGIC = b"FHJ1"
_HEADER = struct.Struct("<4sii dd")


def format_number(x) -> str:
    """17 significant digits, which round-trips every float64."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines += [",".join(format_number(v) for v in row) for row in rows]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a numeric CSV written by :func:`write_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        body = [line.strip().split(",") for line in fh if line.strip()]
    cols: dict[str, np.ndarray] = {}
    for i, name in enumerate(header):
        vals = [row[i] for row in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return cols


def write_snapshot(path: str | Path, f: Field, t: float, binary: bool = True) -> Path:
    """Binary: magic, int32 N, int32 M, float64 L, float64 t, float64 samples
    (little endian, C order).  Text: a header line ``N M L t`` then one
    sample per line."""
    path = Path(path)
    g = f.grid
    if binary:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, g.dim, g.points, g.period, float(t)))
            fh.write(np.ascontiguousarray(f.samples, dtype="<f8").tobytes())
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(f"{g.dim} {g.points} {format_number(g.period)} {format_number(t)}\n")
            fh.write("\n".join(format_number(v) for v in f.samples.ravel()) + "\n")
    return path


def read_snapshot(path: str | Path) -> tuple[Field, float]:
    """Read either snapshot format; returns (field, t)."""
    raw = Path(path).read_bytes()
    if raw[:4] == MAGIC:
        _, dim, m, period, t = _HEADER.unpack_from(raw)
        grid = TorusGrid(dim, m, period)
        data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
        if data.size != m**dim:
            raise ValueError(f"{path}: expected {m ** dim} samples, found {data.size}")
        return Field(grid, data.reshape(grid.shape)), float(t)
    lines = raw.decode().split()
    try:
        dim, m = int(lines[0]), int(lines[1])
        period, t = float(lines[2]), float(lines[3])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: not a snapshot file") from exc
    grid = TorusGrid(dim, m, period)
    data = np.array([float(v) for v in lines[4:]])
    if data.size != m**dim:
        raise ValueError(f"{path}: expected {m ** dim} samples, found {data.size}")
    return Field(grid, data.reshape(grid.shape)), t


def write_manifest(path: str | Path, entries: dict) -> Path:
    path = Path(path)
    lines = []
    for key, value in entries.items():
        if isinstance(value, (list, tuple)):
            value = " ".join(str(v) for v in value)
        elif isinstance(value, float):
            value = format_number(value)
        lines.append(f"{key} = {value}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_manifest(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
