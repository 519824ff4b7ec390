"""Command line entry point: ``pilotopt run <spec>`` / ``pilotopt validate <spec>``."""

from __future__ import annotations

import argparse
import sys

from .experiment import EXIT_SOLVER, EXIT_SPEC, SpecError, run_experiment, validate
from .optimize import OptimizationError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pilotopt",
                                     description="Max-min pilot and data power experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run the configured methods and write CSV/JSON results"),
                            ("validate", "check closed-form SINRs against Monte Carlo")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("spec", help="INI or JSON experiment spec")
        p.add_argument("--seed", type=int, default=None, help="override the spec seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes/threads")
        p.add_argument("--out", default=None, help="output directory (beats PILOTOPT_OUT)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_SPEC
    driver = run_experiment if args.command == "run" else validate
    try:
        code, out_dir = driver(args.spec, seed=args.seed, threads=args.threads, out=args.out)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OptimizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{args.command}: exit {code}, outputs in {out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
