"""Plain-text outputs: CSV time series, field matrices, legacy VTK, manifests.

Floats are written with ``%.17g`` so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .model import Grid, ModelParams, TimeMesh

FMT = "%.17g"


def _fmt(v) -> str:
    return FMT % v


def write_csv(path, header, columns) -> Path:
    path = Path(path)
    rows = zip(*columns)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_drug(path, s, p: ModelParams, mesh: TimeMesh) -> Path:
    n = mesh.nt + 1
    return write_csv(path, ["t_day", "s", "s_minus", "s_plus", "s_c"],
                     [mesh.times, s, np.full(n, p.s_minus), np.full(n, p.s_plus), np.full(n, p.s_m)])


def write_control(path, u, mesh: TimeMesh) -> Path:
    t = mesh.times
    return write_csv(path, ["t_start_day", "t_end_day", "u_per_day"], [t[:-1], t[1:], u])


def write_gradient(path, gradient, p2, mesh: TimeMesh) -> Path:
    t = mesh.times
    return write_csv(path, ["t_start_day", "t_end_day", "gradient_per_day", "p2_left"],
                     [t[:-1], t[1:], gradient, p2[:-1]])


def write_matrix(path, field) -> Path:
    """Field as a text matrix: one row per y index (``ny`` rows, ``nx`` columns)."""
    path = Path(path)
    np.savetxt(path, np.asarray(field).T, fmt=FMT)
    return path


def write_vtk(path, field, grid: Grid, name: str = "y") -> Path:
    """Legacy ASCII VTK structured-points file of the interior nodes."""
    path = Path(path)
    values = np.asarray(field).T.ravel()  # x varies fastest
    lines = [
        "# vtk DataFile Version 3.0",
        f"{name} tumour density",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx} {grid.ny} 1",
        f"ORIGIN {_fmt(grid.hx)} {_fmt(grid.hy)} 0",
        f"SPACING {_fmt(grid.hx)} {_fmt(grid.hy)} 1",
        f"POINT_DATA {grid.nx * grid.ny}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    lines += [_fmt(v) for v in values]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_cross_section(path, y, grid: Grid, mesh: TimeMesh, times) -> Path:
    """Density along the horizontal centre line at each of ``times``."""
    j = grid.ny // 2
    y = np.asarray(getattr(y, "y", y))
    cols = [grid.x] + [y[mesh.node_index(t)][:, j] for t in times]
    header = ["x_cm"] + [f"y_t{t:g}d" for t in times]
    return write_csv(path, header, cols)


def snapshot_name(t: float) -> str:
    return f"y_t{t:07.3f}"


def write_snapshots(outdir, y, grid: Grid, mesh: TimeMesh, times) -> list[Path]:
    outdir = Path(outdir)
    y = np.asarray(getattr(y, "y", y))
    written = []
    for t in times:
        field = y[mesh.node_index(t)]
        stem = snapshot_name(t)
        written.append(write_matrix(outdir / f"{stem}.txt", field))
        written.append(write_vtk(outdir / f"{stem}.vtk", field, grid))
    return written


class IterateWriter:
    """Streams iteration records to CSV, flushing after every row."""

    def __init__(self, path, fields):
        self.fields = list(fields)
        self._fh = Path(path).open("w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(self.fields)
        self._fh.flush()

    def __call__(self, record):
        d = record.as_dict()
        self._w.writerow([d["k"]] + [_fmt(d[f]) for f in self.fields[1:]])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
