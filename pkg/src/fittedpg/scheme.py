"""Exponentially fitted and upwind 5-point discretisations on a tensor mesh.

Both schemes are assembled row-wise in closed form.  For the fitted scheme the
convection term ``abar_i h_i D^-_x`` is folded into the west diffusion weight
through ``sigma(rho) = sigma(-rho) + rho``, so every row reads

    cW U_{i-1,j} + cE U_{i+1,j} + cS U_{i,j-1} + cN U_{i,j+1} + cC U_{i,j} = rhs

with nonpositive off-diagonals and ``cC = -(cW + cE + cS + cN)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .mesh import TensorMesh
from .problem import ProblemSpec, cell_averages
from .solution import GridFunction

FITTED = "fitted"
UPWIND = "upwind"
SCHEMES = (FITTED, UPWIND)

_TAYLOR_CUT = 1e-4
_LINEAR_CUT = 36.0 * math.log(10.0)
_SERIES_CUT = 1.0

# Bernoulli numbers B_2, B_4, ..., B_24 as exact rationals (scipy's float
# values carry relative errors up to 1e-12)
_BERNOULLI_EVEN = (
    Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30),
    Fraction(5, 66), Fraction(-691, 2730), Fraction(7, 6), Fraction(-3617, 510),
    Fraction(43867, 798), Fraction(-174611, 330), Fraction(854513, 138),
    Fraction(-236364091, 2730),
)
# B_{2n}/(2n)!, n = 1..12: coefficients of rho^{2n-1} in coth(rho/2)/2 - 1/rho
_SERIES = np.array(
    [float(b / math.factorial(2 * n)) for n, b in enumerate(_BERNOULLI_EVEN, start=1)]
)


def sigma(x):
    """Fitting factor ``x / (1 - exp(-x))``, positive for every real x.

    Accepts scalars or arrays.  Uses a Taylor polynomial near zero, returns x
    once ``exp(-x)`` is below double precision, and never overflows for large
    negative arguments.
    """
    xa = np.asarray(x, dtype=float)
    if np.isnan(xa).any():
        raise ValueError("sigma is undefined for NaN")
    out = np.empty_like(xa)
    small = np.abs(xa) < _TAYLOR_CUT
    big = xa > _LINEAR_CUT
    pos = ~small & ~big & (xa > 0)
    neg = ~small & (xa < 0)
    s = xa[small]
    out[small] = 1.0 + s / 2.0 + s * s / 12.0 - s**4 / 720.0
    out[big] = xa[big]
    p = xa[pos]
    out[pos] = p / -np.expm1(-p)
    q = -xa[neg]
    # sigma(-q) = q e^{-q} / (1 - e^{-q})
    out[neg] = q * np.exp(-q) / -np.expm1(-q)
    return out if out.ndim else float(out)


def _half_coth_minus_inv(rho: np.ndarray) -> np.ndarray:
    """``coth(rho/2)/2 - 1/rho`` for rho > 0, accurate to round-off everywhere."""
    out = np.empty_like(rho)
    small = rho < _TAYLOR_CUT
    mid = ~small & (rho < _SERIES_CUT)
    large = rho >= _SERIES_CUT
    r = rho[small]
    out[small] = r / 12.0 - r**3 / 720.0
    r = rho[mid]
    r2 = r * r
    acc = np.zeros_like(r)
    for c in _SERIES[::-1]:
        acc = acc * r2 + c
    out[mid] = acc * r
    r = rho[large]
    out[large] = 1.0 / -np.expm1(-r) - 1.0 / r - 0.5
    return out


def _check_rho(rho) -> np.ndarray:
    ra = np.asarray(rho, dtype=float)
    if np.isnan(ra).any() or (ra <= 0).any():
        raise ValueError("fitting ratios need rho > 0 (strictly positive convection)")
    return ra


def qminus_ratio(rho):
    """``(sigma(rho) - 1)/rho``, the left-cell weight Q^-/h; lies in (1/2, 1)."""
    ra = _check_rho(rho)
    out = 0.5 + _half_coth_minus_inv(np.atleast_1d(ra)).reshape(ra.shape)
    return out if out.ndim else float(out)


def qplus_ratio(rho):
    """``(1 - sigma(-rho))/rho``, the right-cell weight Q^+/h; equals 1 - qminus_ratio."""
    ra = _check_rho(rho)
    out = 0.5 - _half_coth_minus_inv(np.atleast_1d(ra)).reshape(ra.shape)
    return out if out.ndim else float(out)


class StencilRow(NamedTuple):
    cW: float
    cE: float
    cS: float
    cN: float
    cC: float
    rhs: float


@dataclass(frozen=True, eq=False)
class PentaSystem:
    """Interior 5-point rows of a scheme, with boundary values kept separately.

    Coefficient arrays have shape ``(N-1, M-1)``; entry ``[i-1, j-1]`` belongs
    to interior node (i, j).  ``rhs_raw`` is the scheme's right-hand side
    before boundary elimination; ``rhs`` has the Dirichlet couplings moved
    across.
    """

    mesh: TensorMesh
    cW: np.ndarray
    cE: np.ndarray
    cS: np.ndarray
    cN: np.ndarray
    cC: np.ndarray
    rhs_raw: np.ndarray
    boundary: np.ndarray
    scheme: str

    @property
    def n_unknowns(self) -> int:
        return self.cC.size

    @property
    def order(self) -> str:
        """numpy flattening order that puts the shorter axis innermost."""
        return "F" if self.mesh.N <= self.mesh.M else "C"

    @property
    def bandwidth(self) -> int:
        return min(self.mesh.N, self.mesh.M) - 1

    def row(self, i: int, j: int) -> StencilRow:
        if not (1 <= i < self.mesh.N and 1 <= j < self.mesh.M):
            raise IndexError(f"({i}, {j}) is not an interior node")
        s = (i - 1, j - 1)
        return StencilRow(
            float(self.cW[s]), float(self.cE[s]), float(self.cS[s]),
            float(self.cN[s]), float(self.cC[s]), float(self.rhs_raw[s]),
        )

    @property
    def rhs(self) -> np.ndarray:
        g = self.boundary
        r = self.rhs_raw.copy()
        r[0, :] -= self.cW[0, :] * g[0, 1:-1]
        r[-1, :] -= self.cE[-1, :] * g[-1, 1:-1]
        r[:, 0] -= self.cS[:, 0] * g[1:-1, 0]
        r[:, -1] -= self.cN[:, -1] * g[1:-1, -1]
        return r

    def index_grid(self) -> np.ndarray:
        shape = self.cC.shape
        return np.arange(self.n_unknowns).reshape(shape, order=self.order)

    def flatten(self, a: np.ndarray) -> np.ndarray:
        return np.ravel(a, order=self.order)

    def unflatten(self, v: np.ndarray) -> np.ndarray:
        return np.reshape(v, self.cC.shape, order=self.order)

    def matrix(self) -> sp.csr_matrix:
        """Boundary-eliminated sparse matrix in the unknown ordering of ``index_grid``."""
        idx = self.index_grid()
        rows = [idx.ravel()]
        cols = [idx.ravel()]
        vals = [self.cC.ravel()]
        for c, src, dst in (
            (self.cW, np.s_[1:, :], np.s_[:-1, :]),
            (self.cE, np.s_[:-1, :], np.s_[1:, :]),
            (self.cS, np.s_[:, 1:], np.s_[:, :-1]),
            (self.cN, np.s_[:, :-1], np.s_[:, 1:]),
        ):
            rows.append(idx[src].ravel())
            cols.append(idx[dst].ravel())
            vals.append(c[src].ravel())
        n = self.n_unknowns
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )

    def stencil_apply(self, values: np.ndarray) -> np.ndarray:
        """Apply the full stencil to nodal values, returning the interior array."""
        u = values
        return (
            self.cW * u[:-2, 1:-1]
            + self.cE * u[2:, 1:-1]
            + self.cS * u[1:-1, :-2]
            + self.cN * u[1:-1, 2:]
            + self.cC * u[1:-1, 1:-1]
        )

    def dump_coo(self, path: str | Path) -> None:
        """Write the matrix as ``row col value`` lines (0-based, unknown ordering)."""
        A = self.matrix().tocoo()
        with open(path, "w") as fh:
            for r, c, v in zip(A.row, A.col, A.data):
                fh.write(f"{r} {c} {float(v)!r}\n")


def _check_eps(eps: float) -> None:
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"eps must be a positive finite number, got {eps!r}")


def _mesh_arrays(mesh: TensorMesh):
    h, k = mesh.h, mesh.k
    return (
        h[:-1, None], h[1:, None], mesh.hbar[:, None],
        k[None, :-1], k[None, 1:], mesh.kbar[None, :],
    )


def fitted_parts(p: ProblemSpec, mesh: TensorMesh, eps: float):
    """Intermediate quantities of the fitted scheme on interior nodes.

    Returns a dict with ``rho_w`` (rho_{i,j}), ``rho_e`` (rho_{i+1,j}),
    ``Qm``, ``Qp``, ``QC`` and the averaged sources ``fbar_w``, ``fbar_e``.
    """
    _check_eps(eps)
    abar = cell_averages(p.nodal(p.a, mesh))
    fbar = cell_averages(p.nodal(p.f, mesh))
    h = mesh.h[:, None]
    rho = abar * h / eps
    hW, hE = h[:-1], h[1:]
    rho_w = rho[:-1, 1:-1]
    rho_e = rho[1:, 1:-1]
    Qm = hW * qminus_ratio(rho_w)
    Qp = hE * qplus_ratio(rho_e)
    return {
        "rho_w": rho_w,
        "rho_e": rho_e,
        "Qm": Qm,
        "Qp": Qp,
        "QC": Qm + Qp,
        "fbar_w": fbar[:-1, 1:-1],
        "fbar_e": fbar[1:, 1:-1],
    }


def assemble_fitted(p: ProblemSpec, mesh: TensorMesh, eps: float) -> PentaSystem:
    """Petrov-Galerkin scheme with exponential test functions in x, as a 5-point system."""
    q = fitted_parts(p, mesh, eps)
    hW, hE, hb, kS, kN, kb = _mesh_arrays(mesh)
    cW = -eps * sigma(q["rho_w"]) / (hb * hW)
    cE = -eps * sigma(-q["rho_e"]) / (hb * hE)
    cS = -eps * q["QC"] / (hb * kb * kS)
    cN = -eps * q["QC"] / (hb * kb * kN)
    cC = -(cE + cW + cN + cS)
    rhs = (q["Qm"] * q["fbar_w"] + q["Qp"] * q["fbar_e"]) / hb
    return PentaSystem(mesh, cW, cE, cS, cN, cC, rhs, p.nodal(p.g, mesh), FITTED)


def assemble_upwind(p: ProblemSpec, mesh: TensorMesh, eps: float) -> PentaSystem:
    """Classical ``-eps (dxx + dyy) + a D^-_x`` upwinding with pointwise a and f."""
    _check_eps(eps)
    hW, hE, hb, kS, kN, kb = _mesh_arrays(mesh)
    a = p.nodal(p.a, mesh)[1:-1, 1:-1]
    f = p.nodal(p.f, mesh)[1:-1, 1:-1]
    shape = a.shape
    cW = np.broadcast_to(-eps / (hb * hW), shape) - a / hW
    cE = np.broadcast_to(-eps / (hb * hE), shape).copy()
    cS = np.broadcast_to(-eps / (kb * kS), shape).copy()
    cN = np.broadcast_to(-eps / (kb * kN), shape).copy()
    cC = -(cE + cW + cN + cS)
    return PentaSystem(mesh, cW, cE, cS, cN, cC, f, p.nodal(p.g, mesh), UPWIND)


def assemble(p: ProblemSpec, mesh: TensorMesh, eps: float, scheme: str = FITTED) -> PentaSystem:
    if scheme == FITTED:
        return assemble_fitted(p, mesh, eps)
    if scheme == UPWIND:
        return assemble_upwind(p, mesh, eps)
    raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def apply_operator(sys: PentaSystem, u: GridFunction) -> GridFunction:
    """Interior residual ``L^N u - rhs`` (Dirichlet values taken from ``sys``), zero on the boundary."""
    if not sys.mesh.same_as(u.mesh):
        raise ValueError("grid function lives on a different mesh than the system")
    vals = np.array(u.values, dtype=float)
    g = sys.boundary
    vals[0, :], vals[-1, :], vals[:, 0], vals[:, -1] = g[0, :], g[-1, :], g[:, 0], g[:, -1]
    out = np.zeros(sys.mesh.shape)
    out[1:-1, 1:-1] = sys.stencil_apply(vals) - sys.rhs_raw
    return GridFunction(sys.mesh, out)
