"""Piecewise-uniform Shishkin meshes on [0, 1] and their tensor product.

The x-mesh resolves an exponential layer at x = 1 (two regions, N/2 cells
each); the y-mesh resolves characteristic layers at y = 0 and y = 1 (three
regions split 1:2:1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

RIGHT_LAYER = "boundary-layer-right"
BOTH_LAYERS = "boundary-layers-both"
UNIFORM = "uniform"

#: absolute tolerance under which two overlaid nodes are treated as one
MERGE_TOL = 1e-14


def _check_eps(eps: float) -> None:
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"eps must be a positive finite number, got {eps!r}")


def transition_x(eps: float, alpha: float, n: int) -> float:
    """Transition point parameter for the outflow layer, ``min(1/2, 2 eps/alpha ln n)``."""
    _check_eps(eps)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    return min(0.5, 2.0 * (eps / alpha) * math.log(n))


def transition_y(eps: float, m: int, factor: float = 2.0) -> float:
    """Transition parameter for the characteristic layers, ``min(1/4, 2 sqrt(eps) ln m)``.

    ``factor`` replaces the leading 2; values other than 2 exist only for
    sensitivity studies of the layer width.
    """
    _check_eps(eps)
    if int(m) != m or m < 4:
        raise ValueError(f"m must be an integer >= 4, got {m!r}")
    if not factor > 0:
        raise ValueError(f"factor must be positive, got {factor!r}")
    return min(0.25, factor * math.sqrt(eps) * math.log(m))


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Nodes ``0 = x_0 < ... < x_n = 1`` with their cell widths.

    ``steps`` holds the constructive cell widths (one value per uniform
    region), which are what the discretisation uses; ``np.diff(nodes)`` agrees
    with them up to round-off.
    """

    nodes: np.ndarray
    steps: np.ndarray
    transition: float
    kind: str

    @property
    def n(self) -> int:
        return len(self.steps)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for v in self.nodes:
                fh.write(f"{float(v)!r}\n")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_x_mesh(n: int, tau: float) -> Mesh1D:
    """Two-region mesh: n/2 coarse cells on [0, 1-tau], n/2 fine cells on [1-tau, 1]."""
    if int(n) != n or n < 2 or n % 2:
        raise ValueError(f"x-mesh needs an even number of cells >= 2, got {n!r}")
    if not 0 < tau <= 0.5:
        raise ValueError(f"tau_x must lie in (0, 0.5], got {tau!r}")
    half = n // 2
    frac = np.arange(half + 1) / half
    nodes = np.empty(n + 1)
    nodes[: half + 1] = (1.0 - tau) * frac
    # counted back from x = 1 so that both 1 - tau and 1 are hit exactly
    nodes[half:] = 1.0 - tau * frac[::-1]
    steps = np.empty(n)
    steps[:half] = (1.0 - tau) / half
    steps[half:] = tau / half
    kind = UNIFORM if tau == 0.5 else RIGHT_LAYER
    return Mesh1D(_freeze(nodes), _freeze(steps), float(tau), kind)


def build_y_mesh(m: int, tau: float) -> Mesh1D:
    """Three-region mesh with m/4, m/2, m/4 cells on [0,tau], [tau,1-tau], [1-tau,1]."""
    if int(m) != m or m < 4 or m % 4:
        raise ValueError(f"y-mesh needs a cell count divisible by 4, got {m!r}")
    if not 0 < tau <= 0.25:
        raise ValueError(f"tau_y must lie in (0, 0.25], got {tau!r}")
    q = m // 4
    nodes = np.empty(m + 1)
    edge = np.arange(q + 1) / q
    mid = np.arange(2 * q + 1) / (2 * q)
    nodes[: q + 1] = tau * edge
    nodes[q : 3 * q + 1] = tau + (1.0 - 2.0 * tau) * mid
    nodes[3 * q :] = 1.0 - tau * edge[::-1]
    steps = np.empty(m)
    steps[:q] = tau / q
    steps[q : 3 * q] = (1.0 - 2.0 * tau) / (2 * q)
    steps[3 * q :] = tau / q
    kind = UNIFORM if tau == 0.25 else BOTH_LAYERS
    return Mesh1D(_freeze(nodes), _freeze(steps), float(tau), kind)


def uniform_mesh(n: int) -> Mesh1D:
    nodes = np.arange(n + 1) / n
    return Mesh1D(_freeze(nodes), _freeze(np.full(n, 1.0 / n)), 0.0, UNIFORM)


def overlay(a: Mesh1D | np.ndarray, b: Mesh1D | np.ndarray) -> np.ndarray:
    """Sorted union of two node sets, merging points closer than ``MERGE_TOL``."""
    xa = a.nodes if isinstance(a, Mesh1D) else np.asarray(a, dtype=float)
    xb = b.nodes if isinstance(b, Mesh1D) else np.asarray(b, dtype=float)
    pts = np.sort(np.concatenate([xa, xb]))
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.diff(pts) > MERGE_TOL
    return pts[keep]


@dataclass(frozen=True, eq=False)
class TensorMesh:
    xmesh: Mesh1D
    ymesh: Mesh1D

    @property
    def N(self) -> int:
        return self.xmesh.n

    @property
    def M(self) -> int:
        return self.ymesh.n

    @property
    def x(self) -> np.ndarray:
        return self.xmesh.nodes

    @property
    def y(self) -> np.ndarray:
        return self.ymesh.nodes

    @property
    def h(self) -> np.ndarray:
        """Cell widths h_1..h_N (``h[i-1]`` is h_i)."""
        return self.xmesh.steps

    @property
    def k(self) -> np.ndarray:
        return self.ymesh.steps

    @cached_property
    def hbar(self) -> np.ndarray:
        """(h_{i+1} + h_i)/2 for interior i = 1..N-1 (``hbar[i-1]``)."""
        h = self.h
        return _freeze((h[1:] + h[:-1]) / 2.0)

    @cached_property
    def kbar(self) -> np.ndarray:
        k = self.k
        return _freeze((k[1:] + k[:-1]) / 2.0)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N + 1, self.M + 1)

    def same_as(self, other: TensorMesh) -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


def shishkin_mesh(eps: float, alpha: float, n: int, m: int | None = None,
                  tau_y_factor: float = 2.0) -> TensorMesh:
    """Tensor-product Shishkin mesh with n cells in x and m (default n) in y."""
    m = n if m is None else m
    xm = build_x_mesh(n, transition_x(eps, alpha, n))
    ym = build_y_mesh(m, transition_y(eps, m, tau_y_factor))
    return TensorMesh(xm, ym)
