"""Batch front-end: cost tables, profiles, optimization and comparisons.

Exit codes: 0 success, 2 validation, 3 solver failure, 4 I/O.  File
outputs are the contract; terminal output is informational only.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import costs, export, recovery, solver
from .errors import KirchhoffViolation, SolverError, ValidationError
from .fields import divergence, energy
from .scenario import load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _params_from_args(args):
    return costs.CostParams(d=args.d, p=args.p, a=args.a,
                            prefactor=args.prefactor)


def cmd_cost_table(args):
    params = _params_from_args(args)
    masses = sorted(float(m) for m in args.masses.split(","))
    evals = costs.cost_table(masses, params, tol=args.tol)
    path = os.path.join(args.out, args.output)
    costs.write_cost_table_csv(evals, path)
    for ev in evals:
        print("m=%.12g f=%.12g r_star=%.12g" % (ev.m, ev.f_value, ev.r_star))
    print("wrote", path)
    return EXIT_OK


def cmd_profile(args):
    params = costs.CostParams(d=args.d, p=args.p, a=0.0)
    profile = costs.transition_energy(args.xi, args.r1, args.r2, params,
                                      resolution=args.resolution)
    path = os.path.join(args.out, args.output)
    export.write_profile_csv(path, profile)
    print("transition energy %.12g" % profile.energy)
    print("wrote", path)
    return EXIT_OK


def _concentration(scn, result):
    if scn.measure is None:
        return None
    return recovery.mass_fraction_near(result.sigma, scn.measure, 3.0 * scn.eps)


def cmd_minimize(args):
    scn = load_scenario(args.scenario)
    if scn.sources.n_sources == 0 and scn.measure is None:
        pass  # legitimate: zero-energy run
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.jsonl")
    result = solver.minimize(scn.sources, scn.grid, scn.optimizer,
                             trace_file=trace_path)
    export.write_vtk(os.path.join(args.out, "fields.vtk"), scn.grid,
                     scalars={"u": result.u.data},
                     vectors={"sigma": result.sigma})
    export.write_csv_field(os.path.join(args.out, "fields.csv"), scn.grid,
                           {"u": result.u.data,
                            "sigma_mag": result.sigma.center_magnitude()})
    final = result.trace[-1] if result.trace else None
    summary = {
        "iterations": len(result.trace),
        "residual": result.residual,
        "energy": final.as_dict() if final else
        {"gradient_term": 0.0, "potential_term": 0.0,
         "mass_term": 0.0, "total": 0.0},
        "mass_concentration_3eps": _concentration(scn, result),
        "eps": scn.eps,
    }
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print("final energy %.12g residual %.3e"
          % (summary["energy"]["total"], result.residual))
    return EXIT_OK


def _require_measure(scn):
    if scn.measure is None:
        raise ValidationError("scenario.measure is required for this command")


def cmd_recovery_check(args):
    scn = load_scenario(args.scenario)
    _require_measure(scn)
    params = costs.CostParams(d=scn.grid.n - scn.k, p=scn.p, a=scn.a)
    os.makedirs(args.out, exist_ok=True)
    violations = recovery.validate_kirchhoff(scn.measure, scn.sources)
    if violations:
        _write_json(os.path.join(args.out, "kirchhoff.json"),
                    {"violations": [{"vertex": list(v), "balance": b,
                                     "expected": e}
                                    for v, b, e in violations]})
        raise KirchhoffViolation(
            f"{len(violations)} vertex balance violation(s); see kirchhoff.json")
    rec = recovery.build_polyhedral_recovery(scn.measure, scn.sources, scn.eps,
                                             args.delta, params, scn.grid)
    eb = energy(rec.sigma, rec.u, scn.eps, scn.a, scn.p, scn.k)
    limit = recovery.limit_energy(scn.measure, params)
    export.write_vtk(os.path.join(args.out, "recovery.vtk"), scn.grid,
                     scalars={"u": rec.u.data}, vectors={"sigma": rec.sigma})
    summary = {"limit_energy": limit, "recovery_energy": eb.total,
               "gap": eb.total - limit, "eps": scn.eps, "delta": args.delta}
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print("limit %.12g recovery %.12g gap %.12g"
          % (limit, eb.total, eb.total - limit))
    return EXIT_OK


def cmd_compare(args):
    scn = load_scenario(args.scenario)
    _require_measure(scn)
    params = costs.CostParams(d=scn.grid.n - scn.k, p=scn.p, a=scn.a)
    os.makedirs(args.out, exist_ok=True)
    violations = recovery.validate_kirchhoff(scn.measure, scn.sources)
    if violations:
        raise KirchhoffViolation(f"vertex balance violated: {violations}")
    if not scn.measure.segments:
        summary = {"limit_energy": 0.0, "recovery_energy": 0.0,
                   "optimized_energy": 0.0,
                   "gaps": {"recovery": 0.0, "optimizer": 0.0}}
        _write_json(os.path.join(args.out, "compare.json"), summary)
        return EXIT_OK
    rec = recovery.build_polyhedral_recovery(scn.measure, scn.sources, scn.eps,
                                             args.delta, params, scn.grid)
    rec_eb = energy(rec.sigma, rec.u, scn.eps, scn.a, scn.p, scn.k)
    limit = recovery.limit_energy(scn.measure, params)
    result = solver.minimize(scn.sources, scn.grid, scn.optimizer,
                             u_init=rec.u)
    opt_total = result.trace[-1].total if result.trace else 0.0
    summary = {
        "limit_energy": limit,
        "recovery_energy": rec_eb.total,
        "optimized_energy": opt_total,
        "gaps": {"recovery": rec_eb.total - limit,
                 "optimizer": opt_total - limit},
        "eps": scn.eps, "delta": args.delta,
    }
    _write_json(os.path.join(args.out, "compare.json"), summary)
    print("limit %.12g recovery %.12g optimized %.12g"
          % (limit, rec_eb.total, opt_total))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="branchflow",
        description="Phase-field branched transport: cost tables, profiles, "
                    "optimization runs and recovery comparisons.")
    ap.add_argument("--threads", type=int, default=None,
                    help="cap BLAS/OpenMP threads")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--tol", type=float, default=1e-5,
                    help="inner tolerance for reduced-cost evaluations")
    sub = ap.add_subparsers(dest="command", required=True)

    ct = sub.add_parser("cost-table", help="tabulate the reduced cost f(m)")
    ct.add_argument("--d", type=int, default=1)
    ct.add_argument("--p", type=float, default=2.0)
    ct.add_argument("--a", type=float, default=1.0)
    ct.add_argument("--prefactor", default=costs.PREFACTOR_D_OMEGA,
                    choices=[costs.PREFACTOR_D_OMEGA,
                             costs.PREFACTOR_D_MINUS_ONE_OMEGA])
    ct.add_argument("--masses", required=True,
                    help="comma-separated list of masses")
    ct.add_argument("--output", default="cost_table.csv")
    ct.set_defaults(func=cmd_cost_table)

    pr = sub.add_parser("profile", help="radial transition profile")
    pr.add_argument("--xi", type=float, required=True)
    pr.add_argument("--r1", type=float, required=True)
    pr.add_argument("--r2", type=float, required=True)
    pr.add_argument("--d", type=int, default=2)
    pr.add_argument("--p", type=float, default=3.0)
    pr.add_argument("--resolution", type=int, default=512)
    pr.add_argument("--output", default="profile.csv")
    pr.set_defaults(func=cmd_profile)

    mn = sub.add_parser("minimize", help="alternating minimization run")
    mn.add_argument("scenario")
    mn.set_defaults(func=cmd_minimize)

    rc = sub.add_parser("recovery-check",
                        help="build and evaluate the recovery pair")
    rc.add_argument("scenario")
    rc.add_argument("--delta", type=float, default=1e-2)
    rc.set_defaults(func=cmd_recovery_check)

    cp = sub.add_parser("compare",
                        help="limit vs recovery vs optimized energies")
    cp.add_argument("scenario")
    cp.add_argument("--delta", type=float, default=1e-2)
    cp.set_defaults(func=cmd_compare)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        os.makedirs(args.out, exist_ok=True)
        return args.func(args)
    except ValidationError as exc:  # includes KirchhoffViolation
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
