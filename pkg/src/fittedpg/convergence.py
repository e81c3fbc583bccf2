"""Double-mesh convergence sweeps over (eps, N).

For each eps the problem is solved on the Shishkin meshes for N and 2N (each
with its own transition point, so the meshes are not nested) and the two
bilinear interpolants are compared in the sup-norm over the unit square.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .linsolve import DEFAULT_TOL, SolverError, solve
from .mesh import shishkin_mesh
from .problem import ProblemSpec, get_problem
from .scheme import FITTED, assemble
from .solution import GridFunction, sup_diff

log = logging.getLogger(__name__)

DESK_N_MAX = 128


def eps_range(min_pow: int = 0, max_pow: int = 20) -> list[float]:
    """``[2**-min_pow, ..., 2**-max_pow]`` (exact binary values)."""
    return [math.ldexp(1.0, -i) for i in range(min_pow, max_pow + 1)]


def n_range(n_min: int = 8, n_max: int = DESK_N_MAX) -> list[int]:
    if n_min < 4 or n_min & (n_min - 1) or n_max & (n_max - 1):
        raise ValueError("N bounds must be powers of two, at least 4")
    out = []
    n = n_min
    while n <= n_max:
        out.append(n)
        n *= 2
    return out


@dataclass
class SweepConfig:
    problem: str | ProblemSpec
    scheme: str = FITTED
    eps_list: list[float] = field(default_factory=eps_range)
    n_list: list[int] = field(default_factory=n_range)
    m_rule: int | None = None
    tol: float = DEFAULT_TOL
    tau_y_factor: float = 2.0

    def __post_init__(self):
        if not self.eps_list or not self.n_list:
            raise ValueError("eps_list and n_list must be nonempty")
        for n in self.n_list:
            if n % 4:
                raise ValueError(f"N={n} must be divisible by 4 (M = N rule)")

    def spec(self) -> ProblemSpec:
        return get_problem(self.problem) if isinstance(self.problem, str) else self.problem


def solve_on_shishkin(p: ProblemSpec, scheme: str, eps: float, n: int, m: int | None = None,
                      tol: float = DEFAULT_TOL, tau_y_factor: float = 2.0) -> GridFunction:
    mesh = shishkin_mesh(eps, p.alpha, n, m, tau_y_factor)
    u, _ = solve(assemble(p, mesh, eps, scheme), tol=tol)
    return u


def _m_for(cfg: SweepConfig, n: int) -> int:
    return n if cfg.m_rule is None else cfg.m_rule * n


def two_mesh_diff(p: ProblemSpec, scheme: str, eps: float, n: int, *, partner: int | None = None,
                  m: int | None = None, tol: float = DEFAULT_TOL,
                  tau_y_factor: float = 2.0) -> float:
    """``sup |U^N - U^{2N}|`` of the bilinear interpolants.

    ``partner`` overrides the fine level (test hook; ``partner=n`` gives 0).
    """
    fine = 2 * n if partner is None else partner
    mf = None if m is None else m * fine // n
    coarse = solve_on_shishkin(p, scheme, eps, n, m, tol, tau_y_factor)
    fine_u = solve_on_shishkin(p, scheme, eps, fine, mf, tol, tau_y_factor)
    return sup_diff(coarse, fine_u)


def d_levels(n_list: list[int]) -> list[int]:
    """N values needing D^N so that orders exist for every N in ``n_list``."""
    return sorted(set(n_list) | {2 * n for n in n_list})


def _eps_row(args) -> list[float | None]:
    cfg, eps = args
    p = cfg.spec()
    dl = d_levels(cfg.n_list)
    sols: dict[int, GridFunction | None] = {}
    for n in sorted(set(dl) | {2 * n for n in dl}):
        try:
            sols[n] = solve_on_shishkin(
                p, cfg.scheme, eps, n, _m_for(cfg, n), cfg.tol, cfg.tau_y_factor
            )
        except SolverError as exc:
            log.warning("solve failed for eps=%g N=%d: %s", eps, n, exc)
            sols[n] = None
    row = []
    for n in dl:
        a, b = sols[n], sols[2 * n]
        row.append(None if a is None or b is None else sup_diff(a, b))
    return row


@dataclass
class ConvergenceReport:
    """Two-mesh differences and derived orders.

    ``D[e, k]`` is D^N_eps for ``eps_list[e]`` and ``d_levels[k]``, which is
    ``n_list`` plus one extra level so that every N in ``n_list`` has an
    order.  Missing cells are NaN.  Table-shaped properties (``p_local``,
    ``p_uniform``, ``constants``) have one column per ``n_list`` entry.
    """

    problem: str
    scheme: str
    eps_list: list[float]
    n_list: list[int]
    D: np.ndarray

    @property
    def d_levels(self) -> list[int]:
        return d_levels(self.n_list) if self.n_list else []

    @property
    def _cols(self) -> list[int]:
        dl = self.d_levels
        return [dl.index(n) for n in self.n_list]

    @property
    def D_all_uniform(self) -> np.ndarray:
        return _colmax(self.D)

    @property
    def D_table(self) -> np.ndarray:
        return self.D[:, self._cols]

    @property
    def D_uniform(self) -> np.ndarray:
        return self.D_all_uniform[self._cols]

    @property
    def p_local(self) -> np.ndarray:
        p_loc, _ = orders(self.D, self.d_levels)
        return p_loc[:, self._cols]

    @property
    def p_uniform(self) -> np.ndarray:
        _, p_uni = orders(self.D, self.d_levels)
        return p_uni[self._cols]

    def constants(self, p: int) -> np.ndarray:
        return constants(self.D_uniform, self.n_list, p)


def _colmax(D: np.ndarray) -> np.ndarray:
    if D.shape[0] == 0:
        return np.full(D.shape[1], np.nan)
    with np.errstate(all="ignore"):
        m = np.max(np.where(np.isnan(D), -np.inf, D), axis=0)
    return np.where(np.isinf(m), np.nan, m)


def _log2_ratio(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        out = np.log2(a / b)
    ok = np.isfinite(a) & np.isfinite(b) & (a > 0) & (b > 0)
    return np.where(ok, out, np.nan)


def orders(D: np.ndarray, levels: list[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Local orders ``log2(D^N_eps / D^2N_eps)`` and uniform orders from ``max_eps D``.

    Columns of ``D`` correspond to ``levels`` (default: consecutive doublings).
    A column whose 2N partner is absent yields NaN.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    ncol = D.shape[1]
    if levels is None:
        levels = [2**k for k in range(ncol)]
    pos = {n: c for c, n in enumerate(levels)}
    src = [c for c, n in enumerate(levels) if 2 * n in pos]
    dst = [pos[2 * levels[c]] for c in src]
    p_local = np.full(D.shape, np.nan)
    p_local[:, src] = _log2_ratio(D[:, src], D[:, dst])
    Du = _colmax(D)
    p_uni = np.full(ncol, np.nan)
    p_uni[src] = _log2_ratio(Du[src], Du[dst])
    return p_local, p_uni


def constants(D_uniform, n_list, p: int) -> np.ndarray:
    """``N^2 (ln N)^-p D^N`` for each N."""
    if p < 0:
        raise ValueError("p must be >= 0")
    n = np.asarray(n_list, dtype=float)
    if np.any(n < 3):
        raise ValueError("constants need N >= 3")
    return n**2 * np.log(n) ** (-p) * np.asarray(D_uniform, dtype=float)


def run_sweep(cfg: SweepConfig, jobs: int | None = 1) -> ConvergenceReport:
    """Run all (eps, N) cells; eps rows are independent and may run in worker processes."""
    tasks = [(cfg, eps) for eps in cfg.eps_list]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_eps_row, tasks))
    else:
        rows = [_eps_row(t) for t in tasks]
    D = np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=float)
    D = D.reshape(len(rows), len(d_levels(cfg.n_list)))
    label = cfg.problem if isinstance(cfg.problem, str) else cfg.problem.label
    return ConvergenceReport(label, cfg.scheme, list(cfg.eps_list), list(cfg.n_list), D)


def eps_label(eps: float) -> str:
    m, e = math.frexp(eps)
    if m == 0.5:
        return f"2^{e - 1}"
    return f"{eps:g}"


def _cell(v: float) -> str:
    return "" if not np.isfinite(v) else f"{v:.4f}"


def _table(header: list[str], body: list[list[str]], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; use 'markdown' or 'csv'")


def render(report: ConvergenceReport, fmt: str = "markdown", what: str = "orders",
           p: int | None = None) -> str:
    """Order table: eps rows plus a uniform row (``what="orders"``),
    ``what="D"`` for raw differences, or ``what="constants"`` with ``p``.

    Orders for the largest N are left blank since D^{2N} is not swept.
    """
    header = ["eps/N"] + [str(n) for n in report.n_list]
    if what == "constants":
        ps = [p] if isinstance(p, int) else list(p or [0])
        header[0] = "p/N"
        body = [[str(q)] + [_cell(v) for v in report.constants(q)] for q in ps]
        return _table(header, body if report.n_list else [], fmt)
    if what == "D":
        vals, uni = report.D_table, report.D_uniform
        last = "D^N"
    elif what == "orders":
        vals, uni = report.p_local, report.p_uniform
        last = "p^N"
    else:
        raise ValueError(f"unknown table {what!r}")
    if not report.n_list or not report.eps_list:
        return _table(header, [], fmt)
    body = [[eps_label(e)] + [_cell(v) for v in row] for e, row in zip(report.eps_list, vals)]
    body.append([last] + [_cell(v) for v in uni])
    return _table(header, body, fmt)


def parse_table(text: str, fmt: str = "markdown") -> tuple[list[str], list[list[str]]]:
    """Header and body cells of a table produced by :func:`render`."""
    if fmt == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        return rows[0], rows[1:]
    lines = [ln for ln in text.strip().splitlines() if ln.startswith("|")]
    cells = [[c.strip() for c in ln.strip().strip("|").split("|")] for ln in lines]
    return cells[0], [r for r in cells[2:]]
