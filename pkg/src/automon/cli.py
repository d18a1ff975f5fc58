"""Command line: ``automon bench`` and ``automon verify``."""

from __future__ import annotations

import argparse
import sys

from automon.bench import PROBLEMS, ProblemConfig, default_configs, run_suite, write_csv
from automon.errors import CorrectnessError
from automon.monitor import Mechanism
from automon.verify import MUTANTS, SCENARIOS, explore

EXIT_VIOLATION = 1
EXIT_TRUNCATED = 2

MECHANISMS = [m.value for m in Mechanism]


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="automon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="time the synchronization problems under each mechanism")
    b.add_argument("target", nargs="?", choices=["all"], help="run the full default grid")
    b.add_argument("--problem", choices=PROBLEMS, action="append", help="repeatable; default all")
    b.add_argument("--mechanism", choices=MECHANISMS, action="append", help="repeatable; default all")
    b.add_argument("--threads", type=_positive, action="append", help="repeatable; default 2..64")
    b.add_argument("--ops", type=_positive, default=10_000, help="operations per thread")
    b.add_argument("--runs", type=_positive, default=25)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--capacity", type=_positive, help="buffer capacity")
    b.add_argument("--chairs", type=_positive, default=4, help="sleeping-barber chairs")
    b.add_argument("--csv", metavar="PATH", help="write CSV here instead of stdout")
    b.add_argument("-q", "--quiet", action="store_true", help="no progress on stderr")

    v = sub.add_parser("verify", help="explore schedules of a built-in scenario")
    v.add_argument("--scenario", choices=sorted(SCENARIOS))
    v.add_argument("--list", action="store_true", help="list scenarios and exit")
    v.add_argument("--bound", type=_positive, default=200, help="max steps per schedule")
    mode = v.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", help="every schedule (default)")
    mode.add_argument("--random", action="store_true", help="seeded random schedules")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=_positive, default=1000)
    v.add_argument("--limit", type=_positive, help="cap on exhaustive schedules")
    v.add_argument(
        "--mechanism",
        choices=[m for m in MECHANISMS if m != "explicit"],
        default="auto",
    )
    v.add_argument("--mutant", choices=MUTANTS)
    return parser


def _bench(args) -> int:
    problems = args.problem or list(PROBLEMS)
    mechanisms = [Mechanism(m) for m in (args.mechanism or MECHANISMS)]
    threads = args.threads or [2, 4, 8, 16, 32, 64]
    if args.target == "all" and not (args.problem or args.threads or args.capacity):
        configs = default_configs(tuple(threads), args.ops, args.seed)
    else:
        try:
            configs = [
                ProblemConfig(p, t, args.ops, args.capacity, args.chairs, args.seed)
                for p in problems
                for t in threads
            ]
        except ValueError as exc:
            print(f"bench: {exc}", file=sys.stderr)
            return 2

    def progress(cfg, mech, i, result):
        if not args.quiet:
            print(
                f"{cfg.problem} {mech.value} t={cfg.threads} run {i + 1}/{args.runs}: "
                f"{result.wall_time:.3f}s",
                file=sys.stderr,
            )

    try:
        rows = run_suite(configs, mechanisms, runs=args.runs, progress=progress)
    except CorrectnessError as exc:
        print(f"correctness failure, suite void: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    if args.csv:
        write_csv(rows, args.csv)
    else:
        write_csv(rows, sys.stdout)
    return 0


def _verify(args) -> int:
    if args.list:
        for name in sorted(SCENARIOS):
            print(f"{name:22} {SCENARIOS[name]().description}")
        return 0
    if args.scenario is None:
        print("verify: --scenario is required", file=sys.stderr)
        return 2
    verdict = explore(
        SCENARIOS[args.scenario],
        args.bound,
        mode="random" if args.random else "exhaustive",
        seed=args.seed,
        trials=args.trials,
        mechanism=args.mechanism,
        mutant=args.mutant,
        limit=args.limit,
    )
    print(verdict.summary())
    for w in verdict.warnings:
        print(f"warning: {w}")
    if verdict.violation is not None:
        print(verdict.violation.format())
        return EXIT_VIOLATION
    if verdict.truncated:
        print(f"exploration truncated: {verdict.truncated} schedule(s) hit the bound or limit")
        return EXIT_TRUNCATED
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench":
        return _bench(args)
    return _verify(args)


if __name__ == "__main__":
    sys.exit(main())
