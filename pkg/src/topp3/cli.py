"""Command-line front end.

Subcommands: ``solve``, ``profiles``, ``singular``, ``check`` and
``oracle-compare``.  Exit codes: 0 success, 1 validation failure or I/O
error, 2 solver failure, 3 scenario schema error.  ``TOPP3_LOG`` sets the
log level (e.g. ``INFO``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import SchemaError, Topp3Error
from .integrator import Policy, integrate
from .singularity import find_singularities, singular_curve
from .solver import Topp3Problem, Trajectory, solve, to_trajectory, validate

logger = logging.getLogger("topp3")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_SOLVER = 2
EXIT_SCHEMA = 3


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load(args) -> Topp3Problem:
    pb = Topp3Problem.load(args.scenario)
    opts = pb.options
    if args.dt is not None:
        opts.dt = args.dt
    if args.segments is not None:
        opts.N = args.segments
    if args.seed is not None:
        opts.seed = args.seed
        opts.newton.seed = args.seed
    if args.jerk_scale is not None:
        if not args.jerk_scale > 0:
            raise SchemaError("--jerk-scale must be positive")
        pb.constraints = pb.constraints.scaled(args.jerk_scale)
    opts.__post_init__()
    return pb


def cmd_solve(args) -> int:
    pb = _load(args)
    sol = solve(pb)
    out = Path(args.out)
    traj = to_trajectory(sol, pb.path, args.sample_dt)
    files = {"trajectory": "trajectory.csv", "profile": "profile.csv",
             "forward": "forward.csv", "backward": "backward.csv", "bridge": "bridge.csv"}
    _write(out / files["trajectory"], traj.to_csv())
    _write(out / files["profile"], sol.profile.to_csv())
    _write(out / files["forward"], sol.forward.to_csv())
    _write(out / files["backward"], sol.backward.to_csv())
    _write(out / files["bridge"], sol.bridge.profile.to_csv())
    if args.trace:
        trace = {"bridge": sol.bridge.trace,
                 "extensions": [e["trace"] for e in sol.extensions]}
        files["trace"] = "trace.json"
        _write(out / files["trace"], _dump_json(trace))
    _write(out / "solution.json", _dump_json(sol.to_dict(files)))
    rep = validate(traj, pb.constraints, pb.path)
    print(f"structure {' '.join(sol.structure)}; duration {sol.duration:.12g} s; "
          f"{rep.summary()}")
    return EXIT_OK


def cmd_profiles(args) -> int:
    pb = _load(args)
    start, end = pb.boundary_states()
    lim = pb.options.limits
    fwd = integrate(pb.constraints, start, 1, Policy.MaxJerk, limits=lim)
    bwd = integrate(pb.constraints, end, -1, Policy.MaxJerk, limits=lim)
    out = Path(args.out)
    _write(out / "forward.csv", fwd.to_csv())
    _write(out / "backward.csv", bwd.to_csv())
    print(f"forward {fwd.termination.name} at s={fwd.s_range[1]:.12g}; "
          f"backward {bwd.termination.name} at s={bwd.s_range[0]:.12g}")
    return EXIT_OK


def cmd_singular(args) -> int:
    pb = _load(args)
    cs = pb.constraints
    rows = ["s_star,k,side,sd,sdd"]
    sings = find_singularities(cs)
    for sg in sings:
        rows += singular_curve(cs, sg, sd_cap=pb.options.sd_cap).to_csv_rows()
    _write(Path(args.out) / "singular.csv", "\n".join(rows) + "\n")
    print(f"{len(sings)} singularities")
    return EXIT_OK


def cmd_check(args) -> int:
    pb = _load(args)
    with open(args.trajectory) as fh:
        traj = Trajectory.from_csv(fh.read())
    rep = validate(traj, pb.constraints, pb.path, tol=args.tol)
    print(rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_oracle(args) -> int:
    from .oracle import compare_solution

    pb = _load(args)
    sol = solve(pb)
    rep = compare_solution(pb, sol)
    _write(Path(args.out) / "oracle.json", _dump_json(rep.to_dict()))
    if rep.best is None:
        print("single shooting found no connection")
    else:
        print(f"duration solver {sol.duration:.12g} s, oracle {rep.durations['oracle']:.12g} s "
              f"(relative difference {rep.deltas['duration_rel']:.3g})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--out", default=".", help="output directory")
    common.add_argument("--dt", type=float, help="integration time step (s)")
    common.add_argument("--segments", type=int, help="multiple-shooting segments N")
    common.add_argument("--seed", type=int, help="seed for Newton restarts")
    common.add_argument("--trace", action="store_true", help="write Newton traces as JSON")
    common.add_argument("--jerk-scale", type=float, help="multiply all jerk bounds")

    parser = argparse.ArgumentParser(prog="topp3", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="solve a scenario")
    p.add_argument("scenario")
    p.add_argument("--sample-dt", type=float, default=1e-3, help="trajectory sample period")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("profiles", parents=[common], help="dump max-jerk profiles")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_profiles)
    p = sub.add_parser("singular", parents=[common], help="dump singular curves")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_singular)
    p = sub.add_parser("check", parents=[common], help="validate a trajectory CSV")
    p.add_argument("trajectory")
    p.add_argument("scenario")
    p.add_argument("--tol", type=float, default=1e-3, help="allowed violation / row scale")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("oracle-compare", parents=[common],
                       help="compare the bridge with single shooting")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("TOPP3_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("numba").setLevel(logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except Topp3Error as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
