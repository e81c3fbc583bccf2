"""Command-line front end: ``fittedpg solve | convergence | diagnose``.

Exit status is 0 on success, 2 on a usage error and 1 when a solve or a
diagnostic check fails.  Files are written to a temporary name and renamed,
so a failed run never leaves a partial file behind.  Relative output paths
resolve against ``$FITTEDPG_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .convergence import SweepConfig, eps_label, eps_range, n_range, render, run_sweep
from .diagnostics import check_m_matrix, minimum_principle_probe, truncation_orders
from .linsolve import DEFAULT_TOL, METHODS, SolverError, solve
from .mesh import shishkin_mesh
from .problem import EXAMPLES, get_problem
from .scheme import FITTED, SCHEMES, assemble
from .solution import grid_rows, slice_rows

OUTPUT_DIR_ENV = "FITTEDPG_OUTPUT_DIR"

_POW2 = re.compile(r"^\s*2\s*\^\s*(-?\d+)\s*$")

log = logging.getLogger("fittedpg")


def parse_eps(text: str) -> float:
    """``"2^-k"`` (exact power of two) or a decimal such as ``"1e-3"``."""
    m = _POW2.match(text)
    if m:
        val = math.ldexp(1.0, int(m.group(1)))
    else:
        try:
            val = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse eps {text!r}; use 2^-k or a decimal")
    if not (val > 0 and math.isfinite(val)):
        raise argparse.ArgumentTypeError(f"eps must be positive and finite, got {text!r}")
    return val


def parse_slice(text: str) -> tuple[str, float]:
    """``"y=0"`` or ``"x=0.5"``."""
    axis, sep, val = text.partition("=")
    axis = axis.strip()
    if not sep or axis not in ("x", "y"):
        raise argparse.ArgumentTypeError(f"slice must look like y=0 or x=0.5, got {text!r}")
    try:
        v = float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad slice coordinate in {text!r}")
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"slice coordinate must lie in [0, 1], got {v}")
    return axis, v


def parse_powers(text: str) -> list[int]:
    """``"p=1,2,3"`` or ``"1,2,3"``."""
    body = text.split("=", 1)[1] if text.strip().startswith("p=") else text
    try:
        ps = [int(t) for t in body.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --constants value {text!r}; use p=1,2,3")
    if not ps or min(ps) < 0:
        raise argparse.ArgumentTypeError("constants need one or more powers p >= 0")
    return ps


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _resolve(path: str | Path) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def write_text(path: str | Path, text: str) -> Path:
    """Atomic write: temp file in the target directory, then rename."""
    p = _resolve(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return p


def _csv_text(header, rows) -> str:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    return "\n".join(lines) + "\n"


def _slice_name(stem: str, axis: str, value: float) -> str:
    return f"{stem}_slice_{axis}{value:g}.csv"


def cmd_solve(args) -> int:
    p = get_problem(args.problem)
    mesh = shishkin_mesh(args.eps, p.alpha, args.n, args.m, args.tau_y_factor)
    sys_ = assemble(p, mesh, args.eps, args.scheme)
    if args.matrix:
        sys_.dump_coo(_resolve(args.matrix))
    try:
        u, stats = solve(sys_, tol=args.tol, method=args.method)
    except SolverError as exc:
        print(f"error: solve failed: {exc}", file=sys.stderr)
        return 1
    log.info(
        "%s/%s eps=%s N=%d M=%d: backward error %.2e, effort %d, %.3fs",
        args.problem, args.scheme, eps_label(args.eps), mesh.N, mesh.M,
        stats.residual_inf, stats.effort, stats.wall_time,
    )
    grid = _csv_text(("x", "y", "u"), grid_rows(u))
    if args.out:
        out = write_text(args.out, grid)
        stem = str(out.with_suffix(""))
    else:
        sys.stdout.write(grid)
        stem = f"{args.problem}_{args.scheme}"
    for axis, value in args.slice or []:
        write_text(_slice_name(stem, axis, value),
                   _csv_text(("coord", "u"), slice_rows(u, axis, value)))
    if args.mesh_csv:
        rows = [(repr(float(v)),) for v in mesh.x]
        write_text(f"{args.mesh_csv}_x.csv", _csv_text(("x",), rows))
        rows = [(repr(float(v)),) for v in mesh.y]
        write_text(f"{args.mesh_csv}_y.csv", _csv_text(("y",), rows))
    return 0


def cmd_convergence(args) -> int:
    if args.n_min > args.n_max:
        raise _UsageError("--n-min must not exceed --n-max")
    if args.eps_min_pow > args.eps_max_pow:
        raise _UsageError("--eps-min-pow must not exceed --eps-max-pow")
    try:
        n_list = n_range(args.n_min, args.n_max)
    except ValueError as exc:
        raise _UsageError(str(exc))
    cfg = SweepConfig(
        problem=args.problem,
        scheme=args.scheme,
        eps_list=eps_range(args.eps_min_pow, args.eps_max_pow),
        n_list=n_list,
        tol=args.tol,
        tau_y_factor=args.tau_y_factor,
    )
    report = run_sweep(cfg, jobs=args.jobs)
    fmt = "csv" if args.format == "csv" else "markdown"
    tables = [("orders", render(report, fmt, "orders"))]
    if args.show_d:
        tables.append(("D", render(report, fmt, "D")))
    for p in args.constants or []:
        tables.append((f"constants_p{p}", render(report, fmt, "constants", p)))
    if args.out_dir or os.environ.get(OUTPUT_DIR_ENV):
        base = Path(args.out_dir) if args.out_dir else Path(".")
        for name, text in tables:
            path = write_text(base / f"{args.problem}_{args.scheme}_{name}.{args.format}", text)
            print(path)
    else:
        sys.stdout.write("\n".join(text for _, text in tables))
    return 1 if np.isnan(report.D).any() else 0


def cmd_diagnose(args) -> int:
    p = get_problem(args.problem)
    mesh = shishkin_mesh(args.eps, p.alpha, args.n, args.m)
    lines = [f"problem {args.problem}, eps={eps_label(args.eps)}, N={mesh.N}, M={mesh.M}"]
    rows = []
    ok = True
    for scheme in args.scheme:
        rep = check_m_matrix(assemble(p, mesh, args.eps, scheme))
        ok &= rep.passed
        lines.append(f"[{scheme}] {rep}")
        rows.append((scheme, "m_matrix", "pass" if rep.passed else "fail",
                     "" if rep.worst_row is None else f"{rep.worst_row[0]}:{rep.worst_row[1]}"))
        try:
            umin = minimum_principle_probe(p, args.eps, args.n, args.m, scheme, args.tol)
        except SolverError as exc:
            print(f"error: solve failed: {exc}", file=sys.stderr)
            return 1
        passed = umin >= -10 * args.tol
        ok &= passed
        lines.append(f"[{scheme}] minimum principle: min U = {umin:.3e} "
                     f"({'PASS' if passed else 'FAIL'})")
        rows.append((scheme, "min_u", "pass" if passed else "fail", repr(umin)))
    if args.truncation:
        for eps in (1.0, args.eps):
            t = truncation_orders(p, eps, args.n)
            lines.append(
                f"truncation eps={eps_label(eps)} N={args.n}->{2 * args.n}: "
                f"uniform-region ratio {t.uniform_ratio:.4f}, "
                f"transition order {t.transition_order:.4f}"
            )
            rows.append(("fitted", f"trunc_ratio_eps{eps_label(eps)}", "", repr(t.uniform_ratio)))
            rows.append(("fitted", f"trunc_order_eps{eps_label(eps)}", "",
                         repr(t.transition_order)))
    print("\n".join(lines))
    if args.csv:
        write_text(args.csv, _csv_text(("scheme", "check", "status", "value"), rows))
    return 0 if ok else 1


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fittedpg",
        description="Fitted Petrov-Galerkin solver for convection-diffusion on Shishkin meshes.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver statistics")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, scheme_multi=False):
        sp.add_argument("--problem", choices=sorted(EXAMPLES), default="example1")
        if scheme_multi:
            sp.add_argument("--scheme", choices=SCHEMES, action="append",
                            help="repeatable; default: both schemes")
        else:
            sp.add_argument("--scheme", choices=SCHEMES, default=FITTED)
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL,
                        help="backward-error tolerance of the linear solve")
        sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log solver statistics")

    sp = sub.add_parser("solve", help="solve once and export the nodal solution")
    common(sp)
    sp.add_argument("--eps", type=parse_eps, required=True, help="2^-k or a decimal")
    sp.add_argument("--n", type=_positive_int, required=True, help="cells in x (even)")
    sp.add_argument("--m", type=_positive_int, help="cells in y (multiple of 4; default N)")
    sp.add_argument("--out", help="solution CSV (x,y,u); default stdout")
    sp.add_argument("--slice", type=parse_slice, action="append",
                    help="also write the interpolant along y=c or x=c")
    sp.add_argument("--method", choices=METHODS, default="splu")
    sp.add_argument("--tau-y-factor", type=float, default=2.0,
                    help="multiplier in the y transition point (default 2)")
    sp.add_argument("--mesh-csv", metavar="STEM", help="write STEM_x.csv and STEM_y.csv")
    sp.add_argument("--matrix", metavar="PATH", help="dump the matrix as row col value lines")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("convergence", help="double-mesh order and constant tables")
    common(sp)
    sp.add_argument("--n-min", type=_positive_int, default=8)
    sp.add_argument("--n-max", type=_positive_int, default=128)
    sp.add_argument("--eps-min-pow", type=int, default=0, help="largest eps is 2^-min")
    sp.add_argument("--eps-max-pow", type=int, default=20, help="smallest eps is 2^-max")
    sp.add_argument("--constants", type=parse_powers, help="e.g. p=1,2,3")
    sp.add_argument("--format", choices=("md", "csv"), default="md")
    sp.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)
    sp.add_argument("--show-d", action="store_true", help="also print the D^N table")
    sp.add_argument("--tau-y-factor", type=float, default=2.0)
    sp.add_argument("--out-dir", help=f"write table files here (default ${OUTPUT_DIR_ENV} or stdout)")
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("diagnose", help="M-matrix, minimum principle and consistency checks")
    common(sp, scheme_multi=True)
    sp.add_argument("--eps", type=parse_eps, required=True)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--m", type=_positive_int)
    sp.add_argument("--truncation", action="store_true",
                    help="truncation ratios at eps=1 and at --eps")
    sp.add_argument("--csv", help="also write the report as CSV")
    sp.set_defaults(func=cmd_diagnose)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "scheme", None) is None:
        args.scheme = list(SCHEMES)
    try:
        return args.func(args)
    except (_UsageError, ValueError) as exc:
        ap.print_usage(sys.stderr)
        print(f"{ap.prog}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
