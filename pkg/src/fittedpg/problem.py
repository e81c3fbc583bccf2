"""Problem data for ``-eps Lap u + a(x, y) u_x = f`` on the unit square.

Coefficient callables take numpy arrays (broadcasting) and return arrays of
the broadcast shape.  The three benchmark problems use module-level functions
so that they pickle cleanly into worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import TensorMesh

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Convection coefficient ``a``, source ``f``, Dirichlet data ``g`` and bound ``alpha``.

    ``alpha`` is supplied rather than computed because the mesh transition
    point depends on it; construction spot-checks ``a >= alpha`` on a 33x33
    grid.
    """

    a: Field
    f: Field
    alpha: float
    g: Field = zero
    label: str = "custom"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        s = np.linspace(0.0, 1.0, 33)
        X, Y = np.meshgrid(s, s, indexing="ij")
        amin = float(np.min(self.a(X, Y)))
        if amin < self.alpha:
            raise ValueError(
                f"convection coefficient drops to {amin:g} below alpha={self.alpha:g}"
            )

    def nodal(self, field: Field, mesh: TensorMesh) -> np.ndarray:
        X, Y = np.meshgrid(mesh.x, mesh.y, indexing="ij")
        return np.broadcast_to(np.asarray(field(X, Y), dtype=float), mesh.shape).copy()

    def with_data(self, f: Field | None = None, g: Field | None = None, label: str | None = None):
        return ProblemSpec(
            a=self.a,
            f=self.f if f is None else f,
            alpha=self.alpha,
            g=self.g if g is None else g,
            label=self.label if label is None else label,
        )


def _a_ex12(x, y):
    return 2.0 + x + x**2 + y**2


def _f_ex1(x, y):
    return 2.0 * (2.0 - x**3) * y * (1.0 - y)


def _f_ex2(x, y):
    return 8.0 * (1.0 - x) * y


def _a_ex3(x, y):
    return 1.0 + x + x**2 + y**2


def _f_ex3(x, y):
    # real branch of t**(2/3): (cbrt t)**2 is defined and nonnegative for t < 0
    t = (2.0 * x - 1.0) * (2.0 * y - 1.0)
    return 2.0 * np.cbrt(t) ** 2 + 4.0 * x * y**2


def example1() -> ProblemSpec:
    return ProblemSpec(a=_a_ex12, f=_f_ex1, alpha=2.0, label="example1")


def example2() -> ProblemSpec:
    return ProblemSpec(a=_a_ex12, f=_f_ex2, alpha=2.0, label="example2")


def example3() -> ProblemSpec:
    return ProblemSpec(a=_a_ex3, f=_f_ex3, alpha=1.0, label="example3")


EXAMPLES = {"example1": example1, "example2": example2, "example3": example3}


def get_problem(name: str) -> ProblemSpec:
    try:
        return EXAMPLES[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(EXAMPLES)}") from None


def cell_averages(values: np.ndarray) -> np.ndarray:
    """Two-point means over x-cells: ``out[i-1, j]`` is the average on [x_{i-1}, x_i] at y_j."""
    return 0.5 * (values[:-1, :] + values[1:, :])


def _avg(field: Field, mesh: TensorMesh, i: int, j: int) -> float:
    if not (1 <= i <= mesh.N and 0 <= j <= mesh.M):
        raise IndexError(f"cell index (i={i}, j={j}) outside 1..{mesh.N} x 0..{mesh.M}")
    x, y = mesh.x, mesh.y[j]
    return float(0.5 * (field(x[i - 1], y) + field(x[i], y)))


def avg_a(p: ProblemSpec, mesh: TensorMesh, i: int, j: int) -> float:
    """Piecewise-constant convection value on cell [x_{i-1}, x_i] at height y_j."""
    return _avg(p.a, mesh, i, j)


def avg_f(p: ProblemSpec, mesh: TensorMesh, i: int, j: int) -> float:
    return _avg(p.f, mesh, i, j)
