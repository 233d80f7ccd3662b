"""Command line entry point: ``hho-ns run ...`` writes a convergence table as CSV."""
from __future__ import annotations

import argparse
import logging
import sys

from .bench import CASES, convergence_study, parse_refinements
from .errors import HHOError, InvalidArgument, SolverError
from .local_ops import FORMS
from .solver import SolverConfig

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_INVALID = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="hho-ns", description="HHO Navier-Stokes convergence studies")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a convergence study and write a CSV table")
    run.add_argument("--case", default="kovasznay", choices=sorted(CASES))
    run.add_argument("--nu", type=float, default=1.0)
    run.add_argument("--degree", type=int, default=2)
    run.add_argument("--mesh", default="cartesian", help="cartesian, triangular or file:PATH ({n} is substituted)")
    run.add_argument("--refine", default="4,8,16,32")
    run.add_argument("--form", default="hho", choices=FORMS)
    run.add_argument("--eta", type=float, default=0.0)
    run.add_argument("--tol", type=float, default=1e-10)
    run.add_argument("--max-iter", type=int, default=25)
    run.add_argument("--out", required=True)
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def _run(args):
    if args.degree < 0:
        raise InvalidArgument("degree must be nonnegative")
    refinements = parse_refinements(args.refine)
    config = SolverConfig(nu=args.nu, tol=args.tol, max_iter=args.max_iter, form=args.form, eta=args.eta)
    exact = CASES[args.case](args.nu)
    table = convergence_study(exact, args.degree, args.mesh, refinements, config)
    table.write_csv(args.out)
    for name, value in table.slopes(min(3, len(table.rows))).items():
        print(f"slope {name}: {value:.3f}")
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except SolverError as exc:
        print(f"hho-ns: solver failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (HHOError, ValueError, OSError) as exc:
        print(f"hho-ns: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
