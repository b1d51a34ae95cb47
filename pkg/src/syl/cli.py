"""Command line front end: ``syl <command> ...``.

Exit codes: 0 success, 2 configuration/input error, 3 convergence or
diagnostics failure, 4 mathematical inconsistency. Log verbosity comes from
the ``SYL_LOG`` environment variable (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import itertools
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .errors import ConfigurationError, DegeneracyWarning, SylError
from .expansion import (
    CRITICAL_P,
    ExpansionInput,
    annulus_expansion_input,
    expansion_coefficient,
    exponent_necessity_scan,
    fit_branch_coefficient,
    verify_limit,
)
from .io import (
    Report,
    check,
    input_hash,
    read_json,
    read_solution,
    write_report,
    write_rows_csv,
    write_solution,
)
from .radial import OUTER, AnnulusProblem, SolverOptions, fit_holder_exponent, solve_annulus
from .singular_set import (
    SurfacePointData,
    junction_point_data,
    minimality_check_k2,
    singular_alpha_roots,
    theorem_a_residual,
)

log = logging.getLogger("syl")


def _setup_logging():
    level = os.environ.get("SYL_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _emit(report: Report, out_prefix):
    sys.stdout.write(report.summary())
    if out_prefix:
        for path in write_report(report, out_prefix):
            log.info("wrote %s", path)


# -- solve-annulus ----------------------------------------------------------


def _solve_one(job):
    a, b, n, k, tol, eps0, prefix, seed = job
    problem = AnnulusProblem(a, b, n, k)
    sol = solve_annulus(problem, SolverOptions(ode_tol=tol, eps0=eps0))
    write_solution(sol, prefix, seed)
    return sol


def _annulus_report(sol, prefix, seed) -> Report:
    p = sol.problem
    results = {"prefix": str(prefix), **sol.stats}
    checks = [check("max |sigma_k - 1|", sol.stats["max_abs_residual"], "<=", sol.options.ode_tol)]
    if sol.junction is not None:
        j = sol.junction
        results.update(r_star=j.r_star, w0=j.w0, dnu_w_plus=j.dnu_w_plus, dnu_w_minus=j.dnu_w_minus)
        checks.append(check("min mu_t inside", sol.stats["min_mu_t_interior"], ">", 0.0))
        checks.append(check("|r_star/sqrt(ab) - 1|", abs(j.r_star / p.r_sym - 1), "<=", 1e-3))
    else:
        results["junction"] = None
    return Report("solve-annulus", {"problem": p, "options": sol.options}, results, checks, seed)


def cmd_solve_annulus(args) -> int:
    combos = list(itertools.product(args.n, args.k))
    for n, k in combos:
        AnnulusProblem(args.a, args.b, n, k)
    SolverOptions(ode_tol=args.tol, eps0=args.eps0)
    jobs = []
    for n, k in combos:
        if len(combos) == 1:
            prefix = args.out_prefix
        else:
            key = input_hash({"a": args.a, "b": args.b, "n": n, "k": k, "tol": args.tol, "eps0": args.eps0})
            prefix = f"{args.out_prefix}_n{n}_k{k}_{key}"
        jobs.append((args.a, args.b, n, k, args.tol, args.eps0, prefix, args.seed))

    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            sols = list(pool.map(_solve_one, jobs))
    else:
        sols = [_solve_one(job) for job in jobs]
    for sol, job in zip(sols, jobs):
        _emit(_annulus_report(sol, job[6], args.seed), None)
    return 0


# -- verify-sigma -----------------------------------------------------------


def cmd_verify_sigma(args) -> int:
    if bool(args.input) == bool(args.from_solution):
        raise ConfigurationError("give exactly one of --input or --from-solution")
    sol = None
    if args.input:
        data = SurfacePointData.from_dict(read_json(args.input))
        if args.k is None:
            raise ConfigurationError("--k is required with --input")
        k = args.k
    else:
        sol = read_solution(args.from_solution)
        data = junction_point_data(sol)
        k = args.k if args.k is not None else sol.problem.k

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegeneracyWarning)
        roots = singular_alpha_roots(data, k)
    for w in caught:
        log.warning("%s", w.message)

    results = {
        "k": k,
        "alpha_plus": roots.alpha_plus,
        "alpha_minus": roots.alpha_minus,
        "real_roots": [{"alpha": a, "multiplicity": m} for a, m in roots.all_roots],
    }
    flags = {"degenerate": roots.degenerate}
    checks = []
    for name, alpha in (("root_plus", roots.alpha_plus), ("root_minus", roots.alpha_minus)):
        res, ok = theorem_a_residual(data, alpha, k)
        results[f"residual_{name}"] = res
        flags[f"cone_ok_{name}"] = ok
        checks.append(check(f"|sigma_(k-1)| at {name}", abs(res), "<=", args.tol))
    if sol is not None:
        j = sol.junction
        for name, alpha in (("dnu_w_plus", j.dnu_w_plus), ("dnu_w_minus", j.dnu_w_minus)):
            res, ok = theorem_a_residual(data, alpha, k)
            results[f"residual_{name}"] = res
            flags[f"cone_ok_{name}"] = ok
            checks.append(check(f"|sigma_(k-1)| at {name}", abs(res), "<=", args.tol))
        results["junction"] = j
    if k == 2:
        mc = minimality_check_k2(data, roots)
        results.update(h_plus=mc.h_plus, h_minus_reversed=mc.h_minus_reversed)
        flags["minimal"] = mc.minimal
    inputs = {"point": data.to_dict(), "k": k}
    _emit(Report("verify-sigma", inputs, results, checks, args.seed, flags), args.out_prefix)
    return 0


# -- expansion --------------------------------------------------------------


def cmd_expansion(args) -> int:
    if bool(args.input) == bool(args.from_solution):
        raise ConfigurationError("give exactly one of --input or --from-solution")
    if args.input:
        inp = ExpansionInput.from_dict(read_json(args.input))
    else:
        inp = annulus_expansion_input(read_solution(args.from_solution), args.side)
    if not 0 < args.dmin < args.dmax:
        raise ConfigurationError("need 0 < dmin < dmax")
    if args.npts < 3:
        raise ConfigurationError("--npts must be at least 3")
    d_grid = np.logspace(np.log10(args.dmax), np.log10(args.dmin), args.npts)

    res = verify_limit(inp, expansion_coefficient(inp, args.p), d_grid, args.dps)
    results = {
        "p": res.p,
        "w_star": res.w_star,
        "denom": res.denom,
        "numerator": res.numerator,
        "limit_residual": res.limit_residual,
        "slope": res.slope,
        "balance_residual": inp.balance_residual,
        "table": list(res.rows),
    }
    flags = {"cone_ok_near": res.cone_ok_near}
    checks = [
        check("|p - 3/2|", abs(res.p - CRITICAL_P), "<=", 0.0),
        check("w_star", res.w_star, "<", 0.0),
        check("limit residual", res.limit_residual, "<=", args.tol),
        check("cone_ok_near", float(res.cone_ok_near), ">=", 1.0),
    ]
    if args.scan_p is not None:
        scan = exponent_necessity_scan(inp, args.scan_p or [1.25, 1.5, 1.75], d_grid, args.dps)
        results["scan"] = scan
    if args.from_solution and args.side == OUTER:
        try:
            fit = fit_branch_coefficient(read_solution(args.from_solution), args.side)
            results["branch_fit_w_star"] = fit.w_star
            checks.append(check("|fit/closed form - 1|", abs(fit.w_star / res.w_star - 1), "<=", 0.05))
        except SylError as exc:
            log.warning("branch fit skipped: %s", exc)
    _emit(Report("expansion", inp.to_dict(), results, checks, args.seed, flags), args.out_prefix)
    if args.out_prefix:
        write_rows_csv(
            f"{args.out_prefix}.limit.csv",
            ("d", "sigma2", "residual", "sigma1", "label"),
            [(r.d, r.sigma2, r.residual, r.sigma1, r.label) for r in res.rows],
        )
    return 0


# -- fit-exponent -----------------------------------------------------------


def cmd_fit_exponent(args) -> int:
    sol = read_solution(args.solution)
    fit = fit_holder_exponent(sol, args.side)
    lo, hi = fit.confidence_interval()
    k = sol.problem.k
    results = {
        "side": args.side,
        "k": k,
        "gamma": fit.gamma,
        "gamma_ci_low": lo,
        "gamma_ci_high": hi,
        "r2": fit.r2,
        "stderr": fit.stderr,
        "n_points": fit.n_points,
        "window_low": fit.window[0],
        "window_high": fit.window[1],
    }
    checks = [check("|gamma - 1/k|", abs(fit.gamma - 1.0 / k), "<=", 0.05)]
    inputs = {"problem": sol.problem, "junction": sol.junction, "side": args.side}
    _emit(Report("fit-exponent", inputs, results, checks, args.seed), args.out_prefix)
    if args.out_csv:
        write_rows_csv(args.out_csv, ("log_dist", "log_jump"), zip(fit.log_dist, fit.log_jump))
    return 0


# -- parser -----------------------------------------------------------------


def _positive(x):
    v = float(x)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {x}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="syl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"syl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-annulus", help="solve the radial problem on {a<|x|<b}")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--tol", type=_positive, default=1e-8, help="ODE residual tolerance")
    p.add_argument("--eps0", type=_positive, default=1e-6, help="boundary cutoff, fraction of b-a")
    p.add_argument("--out-prefix", default="annulus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_solve_annulus)

    p = sub.add_parser("verify-sigma", help="roots and cone checks at a point of Sigma")
    p.add_argument("--input")
    p.add_argument("--from-solution")
    p.add_argument("--k", type=int)
    p.add_argument("--tol", type=_positive, default=1e-6)
    p.add_argument("--out-prefix")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_sigma)

    p = sub.add_parser("expansion", help="boundary-layer coefficient and limit check")
    p.add_argument("--input")
    p.add_argument("--from-solution")
    p.add_argument("--side", choices=("outer", "inner"), default="outer")
    p.add_argument("--p", type=float, default=CRITICAL_P)
    p.add_argument("--dmin", type=_positive, default=1e-7)
    p.add_argument("--dmax", type=_positive, default=1e-2)
    p.add_argument("--npts", type=int, default=11)
    p.add_argument("--dps", type=int, default=50)
    p.add_argument("--tol", type=_positive, default=1e-3)
    p.add_argument("--scan-p", type=float, nargs="*")
    p.add_argument("--out-prefix")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_expansion)

    p = sub.add_parser("fit-exponent", help="Holder exponent of w' at the junction")
    p.add_argument("--solution", required=True)
    p.add_argument("--side", choices=("outer", "inner"), default="outer")
    p.add_argument("--out-csv")
    p.add_argument("--out-prefix")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit_exponent)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except SylError as exc:
        log.debug("command failed", exc_info=True)
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
