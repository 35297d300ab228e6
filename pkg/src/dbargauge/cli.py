"""Command line interface: ``dbargauge verify | identities | solve | homotopy | norms``.

Exit codes: 0 success or converged, 1 completed but failed or not converged,
2 input error, 3 solver error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import forms as F
from .expr import ExprError, evaluate, parse
from .grid import GridCoeff, PolarGrid
from .holder import GRID_MAX_ORDER, NormSpec, data_weights, diag_a, diag_c, holder_norm
from .koppelman import QuadratureSpec, homotopy_residual, operator_norm_probe
from .nash_moser import InputError, SolveConfig, SolverError, iterate
from .problem import BUNDLED, ProblemError, bundled, load
from .resolution import complex_residual, integrability_residual
from .series import SeriesRing
from .suite import run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

PROBES = {"dzb": "1", "zdzb": "z", "zzbdzb": "z*zb", "z2zbdzb": "z^2*zb", "zero": "0"}


class UsageError(ValueError):
    pass


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuple keys become 'a,b'."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else ("inf" if obj > 0 else "-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {(",".join(map(str, k)) if isinstance(k, tuple) else str(k)): _clean(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _clean(obj.item())
    return obj


def _emit(report: dict, args):
    text = json.dumps(_clean(report), indent=2, sort_keys=True)
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _grid_arg(text: str):
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NxM (e.g. 128x256), got {text!r}") from None


def _problem(path: str):
    if path.startswith("bundled:"):
        return bundled(path.split(":", 1)[1])
    return load(path)


# commands -----------------------------------------------------------------------

def cmd_verify(args) -> int:
    prob = _problem(args.problem)
    data = prob.augmented()
    omega = data.connection
    exact = isinstance(omega.backend, SeriesRing)
    res = integrability_residual(omega)
    comp = complex_residual(omega)
    report = {
        "problem": args.problem, "backend": prob.backend, "n": prob.n, "m": prob.m,
        "p": list(prob.p), "tol": args.tol, "exact": exact,
        "integrability": {k: F.sup_norm(v) for k, v in res.items()},
        "complex": {str(s): F.sup_norm(v) for s, v in comp.items()},
    }
    if exact:
        zero = {k: v.is_zero() for k, v in res.items()}
        zero.update({f"complex_{s}": v.is_zero() for s, v in comp.items()})
        report["exact_zero"] = zero
        ok = all(zero.values())
    else:
        vals = list(report["integrability"].values()) + list(report["complex"].values())
        ok = max(vals, default=0.0) <= args.tol
    report["failing"] = [f"{s},{k}" for (s, k), v in report["integrability"].items()
                         if (v > args.tol if not exact else not res[(s, k)].is_zero())]
    report["pass"] = ok
    _emit(report, args)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_identities(args) -> int:
    report = run_suite(args.seed, args.cases, args.acc, args.max_n, args.max_m, args.max_p,
                       corrupt=args.corrupt_product)
    if not args.full:
        report.pop("instances")
    _emit(report, args)
    return EXIT_OK if report["ok"] else EXIT_FAIL


def _solve_config(args, prob) -> SolveConfig:
    kw = {}
    if args.r0 is not None:
        kw["r0"] = args.r0
    elif prob.backend == "grid":
        kw["r0"] = float(prob.grid.get("radius", 0.5))
    if args.grid is not None:
        kw["n_rad"], kw["n_ang"] = args.grid
    elif prob.backend == "grid":
        kw["n_rad"], kw["n_ang"] = int(prob.grid["N_rad"]), int(prob.grid["N_ang"])
    for name in ("tol", "max_iter", "mu", "eps"):
        val = getattr(args, name)
        if val is not None:
            kw[name] = val
    if args.mu is None:
        kw["mu"] = prob.mu
    return SolveConfig(**kw)


def cmd_solve(args) -> int:
    prob = _problem(args.problem)
    if prob.n != 1:
        raise InputError(f"the numeric solver supports n = 1 only (problem has n = {prob.n})")
    config = _solve_config(args, prob)
    grid = PolarGrid(config.r0, config.n_rad, config.n_ang)
    data = prob.augmented(grid)

    def progress(row):
        if args.verbose:
            print(f"k={row['k']} r_k={row['r_k']:.6g} a_k={row['a_k']:.3e}", file=sys.stderr)

    code = EXIT_OK
    error = None
    try:
        report = iterate(data, config, progress)
        if not report.converged:
            code = EXIT_FAIL
    except SolverError as exc:
        report, error, code = exc.report, str(exc), EXIT_SOLVER
        print(f"solver error: {exc}", file=sys.stderr)
    out = report.summary() if report is not None else {"converged": False}
    out["problem"] = args.problem
    if error:
        out["error"] = error
    if args.history and report is not None:
        report.write_history(args.history)
    _emit(out, args)
    return code


def cmd_homotopy(args) -> int:
    text = PROBES.get(args.probe, args.probe)
    node = parse(text, 1)
    nr, na = args.grid

    def residual(nr, na):
        spec = QuadratureSpec(nr, na, taylor_order=args.taylor_order)
        grid = spec.grid(args.radius)
        vals = np.broadcast_to(evaluate(node, grid.z[..., None]), grid.shape).copy()
        M = np.empty((1, 1), dtype=object)
        M[0, 0] = GridCoeff(grid, vals)
        u = F.MatrixForm(1, 1, 1, 1, {(1,): M}, grid)
        return homotopy_residual(u, args.radius, spec, inner=args.inner)

    fine = residual(nr, na)
    report = {"probe": text, "grid": [nr, na], "radius": args.radius, "inner": args.inner,
              "taylor_order": args.taylor_order, "residual": fine}
    if args.refine:
        coarse = residual(nr // 2, na // 2)
        order = math.log2(coarse / fine) if coarse > 0 and fine > 0 else math.nan
        report["refinement"] = {"coarse_grid": [nr // 2, na // 2], "coarse_residual": coarse,
                                "fine_residual": fine, "order": order,
                                "at_roundoff": max(coarse, fine) < 1e-11}
    if args.norm_probe:
        report["norm_probe"] = operator_norm_probe(
            args.h, args.sigma, args.radius, QuadratureSpec(nr, na, taylor_order=args.taylor_order))
    ok = args.max_residual is None or fine <= args.max_residual
    report["pass"] = ok
    _emit(report, args)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_norms(args) -> int:
    prob = _problem(args.problem)
    data = prob.augmented()
    omega = data.connection
    r = args.r if args.r is not None else (float(prob.grid["radius"]) if prob.backend == "grid"
                                            else 1.0)
    mu = args.mu if args.mu is not None else prob.mu
    if prob.backend == "grid" and args.K > GRID_MAX_ORDER:
        raise UsageError(f"grid data support derivative orders up to {GRID_MAX_ORDER}")
    if args.h > args.K:
        raise UsageError("h must not exceed K")
    weights = data_weights(omega, args.K, r, kernel_const=args.kernel_const)
    spec = NormSpec(r, args.h, mu, weights)
    report = {
        "problem": args.problem, "r": r, "h": args.h, "mu": mu,
        "weights": list(weights.values), "weight_sources": list(weights.provenance),
        "weight_violations": weights.violations(),
        "entries": {f"{s},{k}": holder_norm(f, spec) for (s, k), f in omega.entries.items()},
        "a": diag_a(omega, spec), "c": diag_c(omega, spec),
    }
    _emit(report, args)
    return EXIT_OK


# parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dbargauge", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    problem_help = f"problem JSON file, or bundled:NAME with NAME in {', '.join(BUNDLED)}"

    v = sub.add_parser("verify", help="integrability and complex residuals of a problem")
    v.add_argument("problem", help=problem_help)
    v.add_argument("--tol", type=float, default=1e-10, help="threshold for grid data")
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("identities", help="randomized exact identity suite")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--cases", type=int, default=50)
    i.add_argument("--acc", type=int, default=4, help="accuracy degree of random series")
    i.add_argument("--max-n", type=int, default=2)
    i.add_argument("--max-m", type=int, default=2)
    i.add_argument("--max-p", type=int, default=2)
    i.add_argument("--full", action="store_true", help="include per-instance results")
    i.add_argument("--corrupt-product", action="store_true", help=argparse.SUPPRESS)
    i.set_defaults(func=cmd_identities)

    s = sub.add_parser("solve", help="run the iteration on an n = 1 problem")
    s.add_argument("problem", help=problem_help)
    s.add_argument("--r0", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", type=int, dest="max_iter")
    s.add_argument("--grid", type=_grid_arg, help="NxM radial x angular nodes")
    s.add_argument("--mu", type=float)
    s.add_argument("--eps", type=float)
    s.add_argument("--history", help="write the per-step history as CSV")
    s.add_argument("--verbose", action="store_true", help="progress on stderr")
    s.set_defaults(func=cmd_solve)

    h = sub.add_parser("homotopy", help="homotopy residual of a probe and refinement order")
    h.add_argument("--probe", default="dzb",
                   help=f"coefficient of dzb as an expression, or one of {', '.join(PROBES)}")
    h.add_argument("--grid", type=_grid_arg, default=(128, 256))
    h.add_argument("--radius", type=float, default=1.0)
    h.add_argument("--inner", type=float, default=0.9, help="evaluation disk as a fraction of r")
    h.add_argument("--taylor-order", type=int, default=3, dest="taylor_order")
    h.add_argument("--refine", action="store_true", help="also run at half resolution")
    h.add_argument("--norm-probe", action="store_true", dest="norm_probe",
                   help="report the interior estimate ratio")
    h.add_argument("--h", type=int, default=0)
    h.add_argument("--sigma", type=float, default=0.5)
    h.add_argument("--max-residual", type=float, dest="max_residual",
                   help="exit 1 if the residual exceeds this")
    h.set_defaults(func=cmd_homotopy)

    nm = sub.add_parser("norms", help="weights and Hoelder norms of problem data")
    nm.add_argument("problem", help=problem_help)
    nm.add_argument("--r", type=float)
    nm.add_argument("--h", type=int, default=1)
    nm.add_argument("--K", type=int, default=2)
    nm.add_argument("--mu", type=float)
    nm.add_argument("--kernel-const", type=float, default=1.0, dest="kernel_const")
    nm.set_defaults(func=cmd_norms)

    for p in (v, i, s, h, nm):
        p.add_argument("--output", "-o", help="write the JSON report here instead of stdout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProblemError, ExprError, InputError, UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
