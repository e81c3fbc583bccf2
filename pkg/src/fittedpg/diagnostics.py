"""Structural checks on assembled systems and consistency probes.

* :func:`check_m_matrix` certifies inverse monotonicity through the sufficient
  condition: nonpositive off-diagonals, positive diagonal, nonnegative row
  sums that are strictly positive next to the boundary.
* :func:`minimum_principle_probe` solves with nonnegative data and reports
  the smallest nodal value.
* :func:`truncation_residual` evaluates ``L^N z - (scheme rhs of L z)`` at
  interior nodes for a smooth ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .linsolve import DEFAULT_TOL, solve
from .mesh import TensorMesh, shishkin_mesh
from .problem import Field, ProblemSpec
from .scheme import FITTED, PentaSystem, assemble, apply_operator
from .solution import GridFunction

#: relative slack for "row sum >= 0" on rows that are not boundary-adjacent
ROW_SUM_SLACK = 1e-13


@dataclass(frozen=True)
class MatrixReport:
    """Outcome of :func:`check_m_matrix`.

    ``worst_row`` is the interior node ``(i, j)`` with the largest violation
    (``None`` when the check passes).  ``row_sum_defect`` is the largest
    ``|cC + cW + cE + cS + cN| / cC`` over all rows, i.e. how far the full
    stencil is from annihilating constants.
    """

    passed: bool
    worst_row: tuple[int, int] | None
    reason: str
    n_rows: int
    row_sum_defect: float

    def __str__(self) -> str:
        head = "PASS" if self.passed else "FAIL"
        s = f"M-matrix check: {head} ({self.n_rows} rows, row-sum defect {self.row_sum_defect:.1e})"
        if not self.passed:
            s += f"; worst row {self.worst_row}: {self.reason}"
        return s


def _boundary_masks(shape):
    n1, m1 = shape
    i = np.arange(n1)[:, None]
    j = np.arange(m1)[None, :]
    west = np.broadcast_to(i == 0, shape)
    east = np.broadcast_to(i == n1 - 1, shape)
    south = np.broadcast_to(j == 0, shape)
    north = np.broadcast_to(j == m1 - 1, shape)
    return west, east, south, north


def check_m_matrix(sys: PentaSystem) -> MatrixReport:
    """Check the M-matrix sufficient condition row by row; never raises."""
    cW, cE, cS, cN, cC = sys.cW, sys.cE, sys.cS, sys.cN, sys.cC
    west, east, south, north = _boundary_masks(cC.shape)
    # same association as the assembly, so a consistent stencil sums to exactly 0
    full = cC + (((cE + cW) + cN) + cS)
    dropped = (
        np.where(west, cW, 0.0) + np.where(east, cE, 0.0)
        + np.where(south, cS, 0.0) + np.where(north, cN, 0.0)
    )
    row_sum = full - dropped
    scale = np.maximum(np.abs(cC), np.finfo(float).tiny)
    edge = west | east | south | north

    with np.errstate(over="ignore"):
        rel = np.abs(full) / scale
    bad_diag = np.where(cC > 0, 0.0, 1.0 + np.abs(cC) / scale)
    pos_off = sum(np.maximum(c, 0.0) for c in (cW, cE, cS, cN)) / scale
    neg_sum = np.maximum(-row_sum / scale - ROW_SUM_SLACK, 0.0)
    no_strict = np.where(edge & ~(row_sum > 0), 1.0, 0.0)
    checks = (
        (bad_diag, "diagonal entry is not positive"),
        (pos_off, "positive off-diagonal entry"),
        (neg_sum, "negative row sum"),
        (no_strict, "boundary-adjacent row is not strictly dominant"),
    )
    total = bad_diag + pos_off + neg_sum + no_strict
    defect = float(np.max(rel)) if full.size else 0.0
    if not np.any(total > 0):
        return MatrixReport(True, None, "", cC.size, defect)
    flat = int(np.argmax(total))
    r, c = np.unravel_index(flat, cC.shape)
    reason = next(msg for arr, msg in checks if arr[r, c] > 0)
    return MatrixReport(False, (int(r) + 1, int(c) + 1), reason, cC.size, defect)


def _sample_nonnegative(field: Field, name: str, on_boundary: bool) -> None:
    s = np.linspace(0.0, 1.0, 65)
    if on_boundary:
        z, o = np.zeros_like(s), np.ones_like(s)
        pts = [(s, z), (s, o), (z, s), (o, s)]
    else:
        X, Y = np.meshgrid(s, s, indexing="ij")
        pts = [(X, Y)]
    for x, y in pts:
        if np.min(field(x, y)) < 0:
            raise ValueError(f"{name} takes negative values; the probe needs {name} >= 0")


def minimum_principle_probe(p: ProblemSpec, eps: float, n: int, m: int | None = None,
                            scheme: str = FITTED, tol: float = DEFAULT_TOL) -> float:
    """Smallest nodal value of the discrete solution for data ``f >= 0``, ``g >= 0``.

    Nonnegativity of the data is checked by sampling on a 65x65 grid.
    """
    _sample_nonnegative(p.f, "f", on_boundary=False)
    _sample_nonnegative(p.g, "g", on_boundary=True)
    mesh = shishkin_mesh(eps, p.alpha, n, m)
    u, _ = solve(assemble(p, mesh, eps, scheme), tol=tol)
    return float(np.min(u.values))


def operator_of(p: ProblemSpec, eps: float, z_x: Field, z_xx: Field, z_yy: Field) -> Field:
    """``L z = -eps (z_xx + z_yy) + a z_x`` assembled from the derivatives of z."""

    def lz(x, y):
        return -eps * (z_xx(x, y) + z_yy(x, y)) + p.a(x, y) * z_x(x, y)

    return lz


def truncation_residual(z: Field, lz: Field, p: ProblemSpec, mesh: TensorMesh,
                        eps: float) -> np.ndarray:
    """Residual ``L^N z - rhs(L z)`` of the fitted scheme at interior nodes.

    Returns an ``(N-1, M-1)`` array; entry ``[i-1, j-1]`` belongs to node
    (i, j).  Dirichlet data are taken from ``z`` itself, so only the
    interior discretisation error remains.
    """
    if not isinstance(mesh, TensorMesh):
        raise TypeError("mesh must be a TensorMesh")
    probe = p.with_data(f=lz, g=z, label=f"{p.label}+probe")
    sys = assemble(probe, mesh, eps, FITTED)
    zn = probe.nodal(z, mesh)
    if not np.all(np.isfinite(zn)):
        raise ValueError("z is not finite on the mesh")
    return apply_operator(sys, GridFunction(mesh, zn)).values[1:-1, 1:-1]


# smooth probe function for the consistency ratios
def _z(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _z_x(x, y):
    return np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)


def _z_xx(x, y):
    return -np.pi**2 * _z(x, y)


_z_yy = _z_xx


@dataclass(frozen=True)
class TruncationOrders:
    """Two-level consistency measurements for ``z = sin(pi x) sin(pi y)``.

    ``uniform_ratio``: max residual at N over max residual at 2N on coarse-
    region nodes away from the transition column (4 for second order).
    ``transition_order``: log2 of the same ratio on the transition column
    ``x = 1 - tau_x`` (NaN when the x-mesh is uniform at either level).
    """

    eps: float
    n: int
    uniform_ratio: float
    transition_order: float


def truncation_orders(p: ProblemSpec, eps: float, n: int) -> TruncationOrders:
    lz = operator_of(p, eps, _z_x, _z_xx, _z_yy)
    meshes = [shishkin_mesh(eps, p.alpha, level) for level in (n, 2 * n)]
    graded = all(m.xmesh.transition < 0.5 for m in meshes)
    inner, trans = [], []
    for mesh in meshes:
        r = np.abs(truncation_residual(_z, lz, p, mesh, eps))
        half = mesh.N // 2
        # node i sits at row i-1; rows 0..half-3 are nodes 1..half-2, clear of the transition
        inner.append(r[: half - 2].max() if graded else r.max())
        trans.append(r[half - 1].max())
    ratio = inner[0] / inner[1]
    order = math.log2(trans[0] / trans[1]) if graded else math.nan
    return TruncationOrders(eps, n, float(ratio), order)
