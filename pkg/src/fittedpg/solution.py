"""Nodal grid functions, their bilinear interpolants and CSV export."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import Mesh1D, TensorMesh, overlay


def _locate(nodes: np.ndarray, t: np.ndarray):
    """Cell index and local coordinate in [0, 1] of each point in ``t``."""
    idx = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, len(nodes) - 2)
    lo, hi = nodes[idx], nodes[idx + 1]
    w = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
    return idx, w


def _check_unit(name: str, t: np.ndarray) -> None:
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values ``U[i, j]`` at the nodes ``(x_i, y_j)`` of a tensor mesh."""

    mesh: TensorMesh
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.mesh.shape:
            raise ValueError(
                f"values have shape {self.values.shape}, mesh expects {self.mesh.shape}"
            )

    def eval(self, x, y):
        """Bilinear interpolant at points (x, y); broadcasts like numpy."""
        xa, ya = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        _check_unit("x", xa)
        _check_unit("y", ya)
        i, s = _locate(self.mesh.x, xa)
        j, t = _locate(self.mesh.y, ya)
        U = self.values
        out = (
            (1 - s) * (1 - t) * U[i, j]
            + s * (1 - t) * U[i + 1, j]
            + (1 - s) * t * U[i, j + 1]
            + s * t * U[i + 1, j + 1]
        )
        return out if out.ndim else float(out)

    def eval_grid(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Interpolant on the tensor grid ``xs x ys``, shape ``(len(xs), len(ys))``."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        _check_unit("x", xs)
        _check_unit("y", ys)
        i, s = _locate(self.mesh.x, xs)
        j, t = _locate(self.mesh.y, ys)
        U = self.values
        rows = (1 - s)[:, None] * U[i, :] + s[:, None] * U[i + 1, :]
        return (1 - t)[None, :] * rows[:, j] + t[None, :] * rows[:, j + 1]

    def slice(self, axis: str, value: float):
        """Interpolant along ``x = value`` (axis "x") or ``y = value`` (axis "y").

        Returns the nodal coordinates along the free direction and the values.
        """
        if axis == "y":
            coords = self.mesh.x
            vals = self.eval_grid(coords, np.array([value]))[:, 0]
        elif axis == "x":
            coords = self.mesh.y
            vals = self.eval_grid(np.array([value]), coords)[0, :]
        else:
            raise ValueError(f"slice axis must be 'x' or 'y', got {axis!r}")
        return coords, vals


def sup_diff(a: GridFunction, b: GridFunction) -> float:
    """Exact sup-norm over the unit square of the difference of two bilinear interpolants.

    On each cell of the overlay grid both interpolants are bilinear, so the
    difference attains its extremes at overlay corners.
    """
    xs = overlay(a.mesh.xmesh, b.mesh.xmesh)
    ys = overlay(a.mesh.ymesh, b.mesh.ymesh)
    return float(np.max(np.abs(a.eval_grid(xs, ys) - b.eval_grid(xs, ys))))


def _atomic_write(path: str | Path, rows, header) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return repr(float(v))


def grid_rows(gf: GridFunction):
    x, y, U = gf.mesh.x, gf.mesh.y, gf.values
    for j in range(len(y)):
        for i in range(len(x)):
            yield _fmt(x[i]), _fmt(y[j]), _fmt(U[i, j])


def export_grid(gf: GridFunction, path: str | Path) -> None:
    """Write ``x,y,u`` rows, all x for y_0 first, then y_1, and so on."""
    try:
        _atomic_write(path, grid_rows(gf), ("x", "y", "u"))
    except OSError as exc:
        raise OSError(f"cannot write grid to {path}: {exc}") from exc


def slice_rows(gf: GridFunction, axis: str, value: float):
    coords, vals = gf.slice(axis, value)
    return [(_fmt(c), _fmt(v)) for c, v in zip(coords, vals)]


def export_slice(gf: GridFunction, axis: str, value: float, path: str | Path) -> None:
    rows = slice_rows(gf, axis, value)
    try:
        _atomic_write(path, rows, ("coord", "u"))
    except OSError as exc:
        raise OSError(f"cannot write slice to {path}: {exc}") from exc


def read_grid(path: str | Path) -> GridFunction:
    """Inverse of :func:`export_grid`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    U = data[:, 2].reshape(len(ys), len(xs)).T.copy()
    xm = Mesh1D(xs, np.diff(xs), 0.0, "uniform")
    ym = Mesh1D(ys, np.diff(ys), 0.0, "uniform")
    return GridFunction(TensorMesh(xm, ym), U)
