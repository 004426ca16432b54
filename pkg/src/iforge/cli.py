"""Command-line interface.

Exit codes: 0 success, 2 an empty or infeasible result, 1 an error.
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import io
from . import polytope as pt
from .controller import synthesize
from .exceptions import IForgeError, SynthesisInfeasible
from .network import check_composed_safety, compose, synthesize_all
from .rci import grid_oracle_maximal_rci
from .sim import (
    build_decentral_platoon,
    simulate,
    table1,
    write_trajectory_csv,
)

logger = logging.getLogger("iforge")

EXIT_OK, EXIT_ERROR, EXIT_EMPTY = 0, 1, 2


class CliError(Exception):
    pass


def resolve_jobs(flag):
    """Worker count: ``IFORGE_JOBS`` beats ``--jobs``, which beats the core count."""
    env = os.environ.get("IFORGE_JOBS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise CliError(f"IFORGE_JOBS must be an integer, got {env!r}") from None
    elif flag is not None:
        value = flag
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise CliError("the job count must be at least 1")
    return value


def _mode_accuracy(args, spec):
    mode = args.mode or spec.synthesis["mode"]
    accuracy = args.accuracy if args.accuracy is not None else spec.accuracy(mode)
    if accuracy <= 0:
        raise CliError("--accuracy must be positive")
    return mode, accuracy


def _require(spec, kind):
    if spec.kind != kind:
        raise CliError(f"this command needs a {kind} system, the spec holds a {spec.kind} one")


def _write_points(path, points, names):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for p in points:
            writer.writerow([repr(float(v) + 0.0) for v in p])


# ---------------------------------------------------------------------------------
# commands


def cmd_synth(args):
    spec = io.load_spec(args.spec)
    _require(spec, "monolithic")
    mode, accuracy = _mode_accuracy(args, spec)
    max_iter = args.max_iter or spec.synthesis["max_iter"]
    ctrl, result = synthesize(spec.system, mode, accuracy, max_iter)
    report = {"mode": mode, "accuracy": accuracy, "iterations": result.iterations,
              "empty": result.empty, "delta_hat": result.delta_hat,
              "history_sizes": result.history_sizes}
    io.write_set_file(args.out, result.set, report)
    if result.empty:
        print(f"empty after {result.iterations} iterations")
        return EXIT_EMPTY
    print(f"{mode} set with {result.set.n_rows} rows after {result.iterations} iterations, "
          f"delta_hat={result.delta_hat:g}")
    return EXIT_OK


def cmd_compose(args):
    spec = io.load_spec(args.spec)
    _require(spec, "network")
    mode, accuracy = _mode_accuracy(args, spec)
    refine = args.refine or spec.synthesis["refine"]
    jobs = resolve_jobs(args.jobs)
    try:
        ctrls = synthesize_all(spec.system, mode, accuracy, None, spec.synthesis["max_iter"],
                               refine, jobs)
    except SynthesisInfeasible as exc:
        print(f"subsystem {exc.index} is infeasible")
        return EXIT_EMPTY
    composed = compose(ctrls)
    report = check_composed_safety(spec.system, composed, args.samples, args.seed)
    io.dump_json(io.controller_to_dict(composed, io.report_dict(report)), args.out)
    print(f"{len(ctrls)} local controllers, {report.n_checks} checks, "
          f"{report.violations} violations")
    return EXIT_OK if report.ok else EXIT_ERROR


def cmd_simulate(args):
    spec = io.load_spec(args.spec)
    _require(spec, "network")
    net = spec.system
    try:
        composed = io.read_controller_file(args.controller, net)
    except OSError as exc:
        raise CliError(f"cannot read controller: {exc}") from exc
    horizon = args.horizon if args.horizon is not None else spec.simulation["horizon"]
    seed = args.seed if args.seed is not None else spec.simulation["seed"]
    traj = simulate(net, composed, horizon, seed, spec.simulation["x0"])
    write_trajectory_csv(traj, args.csv)
    print(f"{horizon} steps, {traj.n_violations} safe-set violations")
    return EXIT_OK if traj.n_violations == 0 else EXIT_EMPTY


def cmd_sweep(args):
    spec = io.load_spec(args.spec)
    if spec.platoon is None or spec.kind != "network":
        raise CliError("sweep needs a decentralised platoon spec")
    sw = spec.sweep
    jobs = resolve_jobs(args.jobs)
    base = spec.platoon
    if args.table1 or sw["parameter"] == "table1":
        deltas, parameters, bounds = sw["deltas"], ("lambda", "epsilon"), None
    else:
        deltas, parameters = [base.delta], (sw["parameter"],)
        bounds = {sw["parameter"]: tuple(sw["range"])} if sw["range"] else None
    result = table1(build_decentral_platoon, deltas, sw["modes"], base, sw["grid_step"],
                    sw["refine"], jobs, parameters, bounds)
    result.to_csv(args.csv)
    for r in result.rows:
        print(f"delta={r.delta:g} density={r.density:.0f} {r.mode}: "
              f"lambda*={r.lambda_star} eps*={r.eps_star}")
    return EXIT_OK


def cmd_project(args):
    P = io.read_set_file(args.set)
    try:
        dims = [int(x) for x in args.dims.split(",")]
    except ValueError:
        raise CliError(f"--dims must be two comma-separated integers, got {args.dims!r}") from None
    if len(dims) != 2 or len(set(dims)) != 2 or any(d < 0 or d >= P.dim for d in dims):
        raise CliError(f"--dims {args.dims} is invalid for a {P.dim}-dimensional set")
    Q = pt.project(P, dims)
    if pt.is_empty(Q):
        _write_points(args.csv, [], ["x", "y"])
        print("empty set")
        return EXIT_EMPTY
    ring = pt.vertices_2d(Q)
    _write_points(args.csv, np.vstack([ring, ring[:1]]), ["x", "y"])
    print(f"{len(ring)} vertices")
    return EXIT_OK


def cmd_oracle(args):
    spec = io.load_spec(args.spec)
    _require(spec, "monolithic")
    pts = grid_oracle_maximal_rci(spec.system, args.resolution, args.u_resolution)
    _write_points(args.csv, pts, [f"x{k}" for k in range(spec.system.n)])
    print(f"{len(pts)} surviving grid points")
    return EXIT_OK if len(pts) else EXIT_EMPTY


# ---------------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="iforge", description=(
        "Robust controlled invariant sets, compositional safety controllers and platoon studies."))
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def synth_opts(p):
        p.add_argument("spec", help="JSON spec file")
        p.add_argument("--mode", choices=["outer", "inner"], help="default: the spec's")
        p.add_argument("--accuracy", type=float, help="eps (outer) or rho (inner)")
        p.add_argument("--out", required=True, help="output JSON file")

    p = sub.add_parser("synth", help="outer/inner RCI set of a monolithic system")
    synth_opts(p)
    p.add_argument("--max-iter", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compose", help="local controllers of a network, composed and checked")
    synth_opts(p)
    p.add_argument("--refine", action="store_true",
                   help="assume neighbours stay in their synthesised sets")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, help="worker processes (IFORGE_JOBS overrides)")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("simulate", help="closed-loop run of a composed controller")
    p.add_argument("spec")
    p.add_argument("--controller", required=True, help="file written by 'compose'")
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="largest feasible disturbance / coupling")
    p.add_argument("spec")
    p.add_argument("--table1", action="store_true", help="sweep every delta of the spec")
    p.add_argument("--csv", required=True)
    p.add_argument("--jobs", type=int, help="worker processes (IFORGE_JOBS overrides)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("project", help="2-D projection of a stored set as a vertex ring")
    p.add_argument("set")
    p.add_argument("--dims", required=True, help="two 0-based coordinates, e.g. 0,2")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("oracle", help="grid fixed point of a 1-D/2-D system")
    p.add_argument("spec")
    p.add_argument("--resolution", type=float, required=True)
    p.add_argument("--u-resolution", type=float)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IForgeError, CliError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
