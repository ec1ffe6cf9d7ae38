"""Command line: ``convext solve | surface | check``.

Exit codes: 0 success, 1 property check failed, 2 infeasible, 3 numeric
failure, 4 bad input or unsupported configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from . import checks
from .errors import ConfigurationError, DomainError, InfeasibleError, NumericError, UnsupportedMethodError
from .fileio import load_instance, parse_range, result_document, write_surface
from .instance import Decomposition, Instance, LabelConstraintSet, build_extensions
from .losses import LossSpec, RegKind, RegularizerSpec
from .oracle import oracle_mip, oracle_convexity
from .solvers import branch_and_bound, solve_relaxation

EXIT_OK, EXIT_CHECK, EXIT_INFEASIBLE, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2, 3, 4
DIAGNOSTIC_BOUND = 1e6
SEED_ENV = "CONVEXT_SEED"

log = logging.getLogger("convext")


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    fields = {"method": args.method, "extension": args.extension}
    if args.method == "oracle":
        sol = oracle_mip(inst)
        fields.update(value=sol.value, theta=sol.theta, y=sol.y.astype(int).tolist())
    elif args.method == "relax":
        res = solve_relaxation(inst, args.extension, budget=args.budget, seed=args.seed)
        fields.update(
            value=res.value,
            lower_bound=res.lower_bound,
            theta=res.theta,
            y=res.y,
            iterations=res.iterations,
            gap_estimate=res.gap_estimate,
        )
    else:
        if args.extension == "theorem1":
            raise ConfigurationError("branch-and-bound runs on the trivial or decomposed extension")
        res = branch_and_bound(inst, args.extension, tol=args.tol, node_cap=args.node_cap, budget=args.budget,
                               seed=args.seed)
        fields.update(
            value=res.incumbent_value,
            theta=res.incumbent_theta,
            y=res.incumbent_y.astype(int).tolist(),
            nodes=res.nodes_explored,
            proven_gap=res.proven_gap,
            node_cap_hit=res.node_cap_hit,
        )
    sys.stdout.write(result_document(fields))
    return EXIT_OK


def surface_function(
    loss: str,
    reg: str,
    C: float,
    x: float,
    extension: str = "decomposed",
    bound: Optional[float] = None,
    half: bool = True,
    c0: float = 1.0,
    c1: float = 1.0,
    diagnostic_unbounded: bool = False,
):
    """``f(theta, y)`` for the one-sample extension ``phi'`` (scalar ``theta``).

    ``extension``: ``decomposed`` (whole term extended), ``trivial`` (loss
    extended, regularizer kept), ``logistic_partial``, ``theorem1`` (tightest
    extension by enumeration; equal to ``decomposed`` for one sample) or
    ``raw`` (labels plugged into the loss formulas; not convex).

    ``diagnostic_unbounded`` evaluates the L1 envelope of an unbounded
    parameter through a huge box, exposing the jump at the label boundary.
    """
    lower = upper = None
    if bound is not None:
        lower, upper = (-bound,), (bound,)
    elif diagnostic_unbounded:
        if RegKind(reg) is not RegKind.L1:
            raise ConfigurationError("the unbounded diagnostic mode applies to the L1 regularizer")
        lower, upper = (-DIAGNOSTIC_BOUND,), (DIAGNOSTIC_BOUND,)
    regspec = RegularizerSpec(reg, half, lower, upper)
    dec = {
        "decomposed": Decomposition.FULL_TERM,
        "theorem1": Decomposition.FULL_TERM,
        "raw": Decomposition.FULL_TERM,
        "trivial": Decomposition.LOSS_ONLY,
        "logistic_partial": Decomposition.LOGISTIC_PARTIAL,
    }.get(extension)
    if dec is None:
        raise ConfigurationError(f"unknown extension {extension!r}")
    inst = Instance(np.array([[x]]), C, LossSpec(loss, c0, c1), regspec, LabelConstraintSet(1), dec)
    if extension == "raw":
        f = lambda t, y: inst.raw_objective_value([t], [y])
    elif extension == "theorem1":
        from .tightest import LabelSet, tightest_extension_value

        Y = LabelSet(1, ((0,), (1,)))
        f = lambda t, y: tightest_extension_value(inst, Y, [t], [y])
    else:
        model = build_extensions(inst)
        f = lambda t, y: model.value(np.array([t]), np.array([y]))
    return f


def surface_rows(loss: str, reg: str, C: float, x: float, thetas, ys, extension: str = "decomposed", **kw) -> List[tuple]:
    """``(theta, y, value)`` rows, theta-major; see ``surface_function`` for the options."""
    f = surface_function(loss, reg, C, x, extension, **kw)
    return [(float(t), float(y), float(f(t, y))) for t in thetas for y in ys]


def cmd_surface(args) -> int:
    rows = surface_rows(
        args.loss,
        args.reg,
        args.C,
        args.x,
        parse_range(args.theta),
        parse_range(args.y),
        args.extension,
        bound=args.bound,
        half=not args.full_norm,
        c0=args.c0,
        c1=args.c1,
        diagnostic_unbounded=args.diagnostic_unbounded,
    )
    write_surface(args.out, rows, ("theta", "y", "value"))
    sys.stdout.write(result_document({"rows": len(rows), "out": args.out}))
    return EXIT_OK


def cmd_check(args) -> int:
    if args.suite == "convexity" and args.raw:
        viol = oracle_convexity(checks.raw_surface(), [-3.0, 0.0], [3.0, 1.0], args.samples or 10_000, args.seed)
        reports = [checks.Report("convexity", "raw hinge/l2", max(viol, 0.0), 1e-8, args.samples or 10_000,
                                 {"surface": "0.5 theta^2 + 5 hinge(theta, y)", "seed": args.seed})]
    else:
        fn = checks.SUITES[args.suite]
        kw = {"seed": args.seed}
        if args.samples:
            kw["samples"] = args.samples
        if args.suite == "oracle":
            kw["m"] = args.m
        reports = fn(**kw)
    failed = [r for r in reports if not r.passed]
    for r in reports:
        print(r.line())
    for r in failed:
        print(f"offending configuration ({r.name}): " + json.dumps(r.worst, default=float))
    return EXIT_CHECK if failed else EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors share the bad-input exit code; argparse's own 2 means "infeasible" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="convext", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    default_seed = int(os.environ.get(SEED_ENV, "0"))

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--method", choices=["bnb", "relax", "oracle"], default="bnb")
    s.add_argument("--extension", choices=["trivial", "decomposed", "theorem1"], default="decomposed")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--node-cap", type=int, default=10_000)
    s.add_argument("--budget", type=int, default=300)
    s.add_argument("--seed", type=int, default=default_seed)
    s.add_argument("--single-thread", action="store_true", help="accepted for compatibility; solving is always single-threaded")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("surface", help="write a (theta, y, value) grid of a one-sample extension")
    g.add_argument("--loss", required=True, choices=["hinge", "squared_hinge", "logistic", "squared_difference"])
    g.add_argument("--reg", required=True, choices=["l1", "l2"])
    g.add_argument("--C", type=float, required=True)
    g.add_argument("--x", type=float, default=1.0)
    g.add_argument("--c0", type=float, default=1.0)
    g.add_argument("--c1", type=float, default=1.0)
    g.add_argument("--bound", type=float, default=None, help="box [-bound, bound] on theta")
    g.add_argument("--full-norm", action="store_true", help="use ||theta||^2 instead of half of it")
    g.add_argument("--theta", required=True, help="lo:hi:step (write --theta=-3:3:0.1 for negative lo)")
    g.add_argument("--y", default="0:1:0.05", help="lo:hi:step")
    g.add_argument("--extension", choices=["decomposed", "trivial", "logistic_partial", "theorem1", "raw"],
                   default="decomposed")
    g.add_argument("--diagnostic-unbounded", action="store_true",
                   help="L1 without bounds: evaluate through a huge box to show the boundary jump")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_surface)

    c = sub.add_parser("check", help="run a randomized property suite")
    c.add_argument("--suite", required=True, choices=sorted(checks.SUITES))
    c.add_argument("--samples", type=int, default=None)
    c.add_argument("--seed", type=int, default=default_seed)
    c.add_argument("--m", type=int, default=1, choices=[1, 2], help="parameter dimension for the oracle suite")
    c.add_argument("--raw", action="store_true", help="convexity suite on the raw objective (negative control)")
    c.set_defaults(func=cmd_check)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigurationError, DomainError, UnsupportedMethodError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
