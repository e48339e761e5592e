import argparse
import os
import sys

from loguru import logger

from ._prototype import GreenboundError
from .config import read_json_file
from .runner import (
    run_solve, run_verify_bounds, run_phi_table, run_green_selftest, run_sweep,
    parse_values, exit_code_for,
)


class CommandParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; 2 is reserved for failed checks here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def configure_logging(verbose):
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")


def _load(args):
    config = read_json_file(args.config)
    if args.verbose:
        config["log"] = True
    return config


def _finish(outcome):
    for path in outcome.files:
        print(os.path.relpath(path))
    return outcome.exit_code


def cmd_solve(args):
    return _finish(run_solve(_load(args), args.out))


def cmd_verify_bounds(args):
    return _finish(run_verify_bounds(_load(args), args.out))


def cmd_phi_table(args):
    return _finish(run_phi_table(_load(args), args.out))


def cmd_green_selftest(args):
    return _finish(run_green_selftest(_load(args), args.out))


def cmd_sweep(args):
    return _finish(run_sweep(_load(args), args.param, parse_values(args.values), args.out))


def build_parser():
    parser = CommandParser(
        prog="python -m greenbound",
        description="Green-function bounds for semilinear elliptic problems",
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=CommandParser)
    subparsers.required = True

    commands = (
        ("solve", cmd_solve, "Solve the semilinear Dirichlet problem and write solution.csv"),
        ("verify-bounds", cmd_verify_bounds, "Check the sandwich and supersolution bounds"),
        ("phi-table", cmd_phi_table, "Tabulate Theta and phi for the configured psi"),
        ("green-selftest", cmd_green_selftest, "Run the discrete Green identity checks"),
        ("sweep", cmd_sweep, "Run verify-bounds once per value of a config parameter"),
    )
    for name, func, help_text in commands:
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, metavar="PATH", help="Experiment JSON config")
        sub.add_argument("--out", default=None, metavar="DIR",
                         help="Output directory (default: output.dir from the config, else .)")
        sub.add_argument("--verbose", action="store_true", help="Debug logging")
        if name == "sweep":
            sub.add_argument("--param", required=True, metavar="NAME",
                             help="Dotted config key, e.g. psi.params.gamma")
            sub.add_argument("--values", required=True, metavar="CSVLIST",
                             help="Comma-separated values, e.g. 0.5,1,2")
        sub.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        code = args.func(args)
    except GreenboundError as e:
        print(f"Error: {e}", file=sys.stderr)
        code = exit_code_for(e)
    return code


if __name__ == "__main__":
    sys.exit(main())
