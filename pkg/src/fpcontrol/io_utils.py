"""File emission helpers: round-trippable CSVs and raw density dumps."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .grid import Grid4D

__all__ = ["write_csv", "read_csv", "write_density", "read_density", "format_float"]

_DENSITY_MAGIC = "FPDENS1"


def format_float(x: float) -> str:
    """Shortest decimal string that parses back to the same float."""
    return repr(float(x))


def write_csv(path, header: list[str], rows) -> None:
    """Write rows of floats with exact round-trip formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows)


def write_density(path, f: np.ndarray, grid: Grid4D, time_index: int, time: float) -> None:
    """Dump one snapshot: ASCII header, then float64 little-endian C-order.

    Header lines: magic, axis sizes, lower bounds, upper bounds, time
    index, time value, then a blank line separating the raw payload.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = io.StringIO()
    header.write(f"{_DENSITY_MAGIC}\n")
    header.write("npts: " + " ".join(str(n) for n in grid.npts) + "\n")
    header.write("lo: " + " ".join(format_float(v) for v in grid.lo) + "\n")
    header.write("hi: " + " ".join(format_float(v) for v in grid.hi) + "\n")
    header.write(f"time_index: {time_index}\n")
    header.write(f"time: {format_float(time)}\n")
    header.write("\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("ascii"))
        fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes())


def read_density(path) -> tuple[np.ndarray, Grid4D, int, float]:
    with open(path, "rb") as fh:
        blob = fh.read()
    head, _, payload = blob.partition(b"\n\n")
    lines = head.decode("ascii").splitlines()
    if lines[0] != _DENSITY_MAGIC:
        raise ValueError(f"not a density file: magic {lines[0]!r}")
    fields = dict(line.split(": ", 1) for line in lines[1:])
    npts = tuple(int(v) for v in fields["npts"].split())
    lo = tuple(float(v) for v in fields["lo"].split())
    hi = tuple(float(v) for v in fields["hi"].split())
    grid = Grid4D(lo=lo, hi=hi, npts=npts)
    time_index = int(fields["time_index"])
    time = float(fields["time"])
    f = np.frombuffer(payload, dtype="<f8", count=int(np.prod(npts))).reshape(npts)
    return f.copy(), grid, time_index, time
