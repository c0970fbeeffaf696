"""Command line: ``hensym <verb> [options]``.

Exit codes: 0 success, 2 infeasible, 3 parse or validation error,
4 resource limit, 1 anything else.
"""
from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from . import kernels
from .core import ValidationError
from .io import ParseError, parse_instance
from .milp import FIXED, FULL, PAIR, PER_INTERVAL, ResourceLimit, build_fixed_interval_model, build_full_model
from .milp import count_configurations
from .pipeline import JSON, TEXT, RunConfig, StageError, render, run_pipeline
from .simplex import InfeasibleError, SimplexError
from .symmetry import GroupError, WeightBudgetError

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_PARSE, EXIT_LIMIT = 0, 1, 2, 3, 4

_STOP = {"solve": "solve", "enumerate": "enumerate", "symmetry": "symmetry", "pipeline": "sbc"}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hensym", description="Minimum-matches MILP with symmetry analysis.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb, text in (("solve", "branch-and-bound optimum"),
                       ("enumerate", "all optimal match patterns"),
                       ("symmetry", "classes, group and group-action checks"),
                       ("pipeline", "every stage, symmetry breaking included")):
        p = sub.add_parser(verb, help=text)
        p.add_argument("instance", help="instance file (TOML), or - for standard input")
        p.add_argument("--mode", choices=(FIXED, FULL), default=FIXED)
        p.add_argument("--dt-min", type=Fraction, default=None)
        p.add_argument("--cap", type=int, default=1000)
        p.add_argument("--sbc", action=argparse.BooleanOptionalAction, default=verb == "pipeline")
        p.add_argument("--epsilon", action="store_true", help="merge keys within a relative 1e-9")
        p.add_argument("--format", choices=(TEXT, JSON), default=TEXT)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--match-index", choices=(PAIR, PER_INTERVAL), default=PAIR)
        p.add_argument("--node-limit", type=int, default=10 ** 6)
        p.add_argument("--no-utility-matches", action="store_true",
                       help="leave utility pairs out of the match count")
        p.add_argument("--slack", choices=("residual", "scale-cu", "none"), default="residual",
                       help="how a supply shortfall in an isolated interval is closed")
        p.add_argument("--dump-lp", metavar="DIR", help="write each model's relaxation in plain-text LP form")
        p.add_argument("-o", "--output", help="report file (default standard output)")
    p = sub.add_parser("count-configs", help="n**m one-partner configurations")
    p.add_argument("n", type=int)
    p.add_argument("m", type=int)
    p.add_argument("--brute", action="store_true", help="also count by brute force (n*m <= 24)")
    return ap


def _read(path):
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _dump(instance, config, directory):
    os.makedirs(directory, exist_ok=True)
    if config.mode == FULL:
        from .simplex import min_utility
        duties = None if instance.duties_fixed else min_utility(instance).duties
        models = [("network", build_full_model(instance.cascade(duties), config.match_index))]
    else:
        duties = None if instance.duties_fixed else min_utility(instance).duties
        models = [(f"interval{p.interval.index}", build_fixed_interval_model(p))
                  for p in instance.cascade(duties).problems]
    for label, m in models:
        with open(os.path.join(directory, f"{label}.lp"), "w", encoding="utf-8") as fh:
            fh.write(m.lp.dump())


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.verb == "count-configs":
        try:
            n = count_configurations(args.n, args.m)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        line = f"count: {n}"
        if args.brute:
            try:
                line += f"\nbrute_force: {kernels.count_one_hot(args.n, args.m)}"
            except ValueError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_LIMIT
        print(line)
        return EXIT_OK

    try:
        instance = parse_instance(_read(args.instance))
        config = RunConfig(mode=args.mode, dt_min=args.dt_min, cap=args.cap, sbc=args.sbc,
                           epsilon=args.epsilon, format=args.format, seed=args.seed,
                           match_index=args.match_index, node_limit=args.node_limit,
                           count_utility_matches=not args.no_utility_matches, slack=args.slack,
                           stop_after=_STOP[args.verb] if args.verb != "symmetry" or not args.sbc else "sbc")
    except (ParseError, ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        if args.dump_lp:
            _dump(instance, config, args.dump_lp)
        report = run_pipeline(instance, config)
    except StageError as exc:
        if exc.report is not None:
            exc.report["error"] = {"stage": exc.stage, "message": str(exc.cause)}
            _emit(render(exc.report, config.format), args.output)
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, InfeasibleError):
            return EXIT_INFEASIBLE
        if isinstance(exc.cause, (ResourceLimit, GroupError, WeightBudgetError, SimplexError)):
            return EXIT_LIMIT
        if isinstance(exc.cause, ValidationError):
            return EXIT_PARSE
        return EXIT_ERROR
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _emit(render(report, config.format), args.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
