"""Direct solution of assembled 5-point systems."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .scheme import PentaSystem
from .solution import GridFunction

DEFAULT_TOL = 1e-12
METHODS = ("splu", "banded")


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class MatrixStructureError(ValueError):
    """The system lacks the M-matrix sign pattern the solver relies on."""


@dataclass(frozen=True)
class SolveStats:
    """``residual_inf`` is the componentwise backward error
    ``max_k |b - A u|_k / (|A| |u| + |b|)_k``; ``effort`` is the LU fill
    (nonzeros of L + U) for ``splu`` or the band storage size for ``banded``.
    """

    residual_inf: float
    effort: int
    wall_time: float
    method: str


def check_sign_pattern(sys: PentaSystem) -> None:
    if not np.all(sys.cC > 0):
        raise MatrixStructureError("diagonal entries must be positive")
    for name in ("cW", "cE", "cS", "cN"):
        if np.any(getattr(sys, name) > 0):
            raise MatrixStructureError(f"off-diagonal {name} has positive entries")
    # diagonal dominance (row sums of the full stencil vanish up to round-off)
    off = np.abs(sys.cW) + np.abs(sys.cE) + np.abs(sys.cS) + np.abs(sys.cN)
    if np.any(sys.cC < off * (1 - 1e-12)):
        raise MatrixStructureError("rows are not diagonally dominant")


def backward_error(A, u: np.ndarray, b: np.ndarray) -> float:
    r = np.abs(b - A @ u)
    scale = abs(A) @ np.abs(u) + np.abs(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(scale > 0, r / scale, r)
    return float(ratio.max()) if ratio.size else 0.0


def _banded_form(sys: PentaSystem) -> np.ndarray:
    """LAPACK band storage for ``solve_banded((bw, bw), ...)``."""
    bw = sys.bandwidth
    A = sys.matrix().todia()
    ab = np.zeros((2 * bw + 1, sys.n_unknowns))
    for off, diag in zip(A.offsets, A.data):
        ab[bw - off] = diag
    return ab


def solve(
    sys: PentaSystem, tol: float = DEFAULT_TOL, method: str = "splu"
) -> tuple[GridFunction, SolveStats]:
    """Solve ``sys`` and return the nodal solution (boundary values included).

    ``method`` is ``"splu"`` (sparse LU, default) or ``"banded"`` (LAPACK band
    LU, bandwidth min(N, M) - 1).  Raises :class:`SolverError` when the
    backward error exceeds ``tol``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    check_sign_pattern(sys)
    t0 = time.perf_counter()
    A = sys.matrix()
    b = sys.flatten(sys.rhs)
    try:
        if method == "splu":
            lu = spla.splu(A.tocsc(), permc_spec="COLAMD", diag_pivot_thresh=0.0)
            u = lu.solve(b)
            effort = int(lu.L.nnz + lu.U.nnz)
        else:
            ab = _banded_form(sys)
            bw = sys.bandwidth
            u = solve_banded((bw, bw), ab, b, check_finite=False)
            effort = int(ab.size)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"factorisation failed: {exc}") from exc
    res = backward_error(A, u, b)
    wall = time.perf_counter() - t0
    if not (np.all(np.isfinite(u)) and res <= tol):
        raise SolverError(f"backward error {res:.3e} exceeds tolerance {tol:.1e}", res)
    U = np.array(sys.boundary, dtype=float)
    U[1:-1, 1:-1] = sys.unflatten(u)
    return GridFunction(sys.mesh, U), SolveStats(res, effort, wall, method)
