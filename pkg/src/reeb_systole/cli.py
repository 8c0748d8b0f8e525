"""Command-line entry point: ``reeb-systole <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

from . import capacities, geodesics, metrics, nirenberg, verify
from .sphere import write_grid_csv


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_capacity(args) -> int:
    if args.domain == "ball":
        cv = capacities.ck_ball(args.k, args.scale)
    else:
        cv = capacities.ck_round_disk(args.k, args.scale)
    _emit(cv.to_dict())
    return 0


def cmd_balance(args) -> int:
    m = metrics.load_metric(args.metric)
    bal = metrics.balance(m)
    lo, hi = capacities.c1_interval(bal)
    out = {"balance": bal.to_dict(), "c1_interval": [lo, hi]}
    if args.search:
        out["fiber_search"] = metrics.fiber_radii_search(m).to_dict()
    _emit(out)
    return 0


def cmd_curvature(args) -> int:
    m = metrics.load_metric(args.metric)
    stats = metrics.curvature(m)
    out = stats.to_dict()
    out["total_curvature"] = metrics.total_curvature(m)
    if args.csv:
        write_grid_csv(args.csv, stats.grid, stats.values)
    _emit(out)
    return 0


def cmd_geometry(args) -> int:
    m = metrics.load_metric(args.metric)
    _emit(metrics.geometry(m, args.resolution, args.band_limit).to_dict())
    return 0


def cmd_systole(args) -> int:
    m = metrics.load_metric(args.metric)
    try:
        est = geodesics.find_systole_upper(m, args.starts, args.seed, args.tol)
    except geodesics.SystoleSearchError as exc:
        _emit({"error": str(exc)})
        return 1
    if args.trajectory_csv:
        best = min(est.candidates, key=lambda c: c.length)
        tr = geodesics.flow(m, best.initial_state, best.length, record=True)
        with open(args.trajectory_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "z", "vx", "vy", "vz"])
            for t, y in zip(tr.times, tr.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in y])
    _emit(est.to_dict())
    return 0


def cmd_nirenberg(args) -> int:
    if args.action == "constants":
        rep = nirenberg.cs_series(args.truncation).to_dict()
        rep["cp_ratio_l1"] = nirenberg.cp_ratio(1)
        _emit(rep)
        return 0
    if args.action == "beta-delta":
        _emit({"delta": args.delta, "beta_bound": nirenberg.beta_delta_bound(args.delta),
               "log_beta_bound": nirenberg.log_beta_delta_bound(args.delta)})
        return 0
    K = nirenberg.PrescribedCurvature.load(args.curvature)
    try:
        sol = nirenberg.solve_gauss_equation(K, args.bandlimit, args.tol)
    except nirenberg.GaussSolverError as exc:
        _emit({"error": str(exc), "residual": exc.residual})
        return 1
    out = sol.to_dict()
    out["min_bound_margin"] = nirenberg.check_min_bound(sol)
    out["gradient_bound"] = nirenberg.check_gradient_bound(sol).to_dict()
    out["oscillation_chain"] = nirenberg.oscillation_chain(sol).to_dict()
    if K.antipodal:
        out["onofri_margin"] = nirenberg.check_onofri(sol.u)
    _emit(out)
    return 0


def cmd_verify(args) -> int:
    m = metrics.load_metric(args.metric)
    cfg = verify.VerifyConfig(starts=args.starts, seed=args.seed)
    rep = verify.verify(m, cfg)
    rep.write_json(args.out)
    if args.csv:
        rep.write_csv(args.csv)
    for e in rep.entries:
        print(f"{e.id:28s} {e.status}")
    return 0 if rep.all_hold else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reeb-systole",
                                description="Systolic geometry of Riemannian 2-spheres.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("capacity", help="closed-form capacity c_k")
    s.add_argument("--domain", choices=["ball", "disk"], required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--scale", type=float, default=1.0)
    s.set_defaults(func=cmd_capacity)

    s = sub.add_parser("balance", help="inradius, circumradius and beta")
    s.add_argument("--metric", required=True)
    s.add_argument("--search", action="store_true", help="add the per-fiber eigenvalue search")
    s.set_defaults(func=cmd_balance)

    s = sub.add_parser("curvature", help="Gauss curvature extremes and pinching")
    s.add_argument("--metric", required=True)
    s.add_argument("--csv", help="dump the pointwise curvature grid")
    s.set_defaults(func=cmd_curvature)

    s = sub.add_parser("geometry", help="area, disk-bundle volume, diameter, lambda_1")
    s.add_argument("--metric", required=True)
    s.add_argument("--resolution", type=int, default=64)
    s.add_argument("--band-limit", type=int, default=16)
    s.set_defaults(func=cmd_geometry)

    s = sub.add_parser("systole", help="upper bound on the shortest closed geodesic")
    s.add_argument("--metric", required=True)
    s.add_argument("--starts", type=int, default=512)
    s.add_argument("--tol", type=float, default=geodesics.CLOSURE_TOL)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trajectory-csv", help="dump the shortest orbit found")
    s.set_defaults(func=cmd_systole)

    s = sub.add_parser("nirenberg", help="Gauss curvature equation and constants")
    nsub = s.add_subparsers(dest="action", required=True)
    n = nsub.add_parser("solve")
    n.add_argument("--curvature", required=True)
    n.add_argument("--bandlimit", type=int, default=32)
    n.add_argument("--tol", type=float, default=1e-8)
    n = nsub.add_parser("constants")
    n.add_argument("--truncation", type=int, default=100)
    n = nsub.add_parser("beta-delta")
    n.add_argument("--delta", type=float, required=True)
    s.set_defaults(func=cmd_nirenberg)

    s = sub.add_parser("verify", help="check every inequality for a metric")
    s.add_argument("--metric", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--csv")
    s.add_argument("--starts", type=int, default=512)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
