"""CSV / JSON / binary emitters.  All writers are deterministic: fixed float format, sorted keys."""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .model import Grid

MAGIC = b"DGC1"


def fmt(v) -> str:
    return repr(float(v))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def grid_header(grid: Grid) -> str:
    return (f"# N={grid.N} M={grid.M} m_delay={grid.m_delay} T={fmt(grid.T)} h={fmt(grid.h)} "
            f"L={fmt(grid.domain_right)}")


def write_trajectory_csv(path, values, grid: Grid, first_index: int | None = None) -> None:
    """One row per time step: k, t_k, then the N+1 nodal values."""
    values = np.asarray(values)
    k0 = -grid.m_delay if first_index is None else first_index
    with open(path, "w", newline="") as fh:
        fh.write(grid_header(grid) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t"] + [f"x{i}" for i in range(grid.N + 1)])
        for j, row in enumerate(values):
            k = k0 + j
            w.writerow([k, fmt(k * grid.dt)] + [fmt(v) for v in row])


def read_trajectory_csv(path):
    with open(path) as fh:
        header = fh.readline().lstrip("# ").split()
        meta = dict(item.split("=") for item in header)
        rows = list(csv.reader(fh))[1:]
    values = np.array([[float(v) for v in r[2:]] for r in rows])
    return values, meta


def write_binary(path, values, grid: Grid) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", grid.N, grid.M, grid.m_delay))
        fh.write(values.tobytes())


def read_binary(path):
    """Return (values, (N, M, m_delay)); rows are k = -m_delay..M."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError("not a DGC1 dump")
    N, M, m = struct.unpack("<III", data[4:16])
    values = np.frombuffer(data[16:], dtype="<f8").reshape(-1, N + 1)
    return values.copy(), (N, M, m)


def write_control(outdir, result, grid: Grid, stem: str = "control") -> None:
    outdir = Path(outdir)
    write_json(outdir / f"{stem}.json", {**result.summary(), "residual_history": result.residual_history,
                                         "functional_history": result.functional_history})
    write_trajectory_csv(outdir / f"{stem}_u.csv", result.u, grid, first_index=0)


def write_report(outdir, stem, report) -> None:
    """Audit report: one CSV row per sample x s, JSON summary."""
    outdir = Path(outdir)
    keys = ["sample", "s", "lhs", "rhs", "ratio", "flag"]
    rows = [[r[k] if r[k] is not None else "" for k in keys] for r in report.rows]
    write_rows(outdir / f"{stem}.csv", keys, rows)
    write_json(outdir / f"{stem}.json", report.summary())
