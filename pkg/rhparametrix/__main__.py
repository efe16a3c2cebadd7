import argparse
import logging
import sys

from rhparametrix.cli import commands
from rhparametrix.cli.config import ConfigError, ProblemConfig
from rhparametrix.differentials import (
    DifferentialConstructionError,
    PoleCollisionError,
    PoleError,
)
from rhparametrix.numerics import NonConvergenceError
from rhparametrix.parametrix import EndpointEvaluationError, ParametrixBuildError
from rhparametrix.period_map import InversionError
from rhparametrix.surface import SheetPointError, SurfaceConfigError
from rhparametrix.utils import logger, setup_logger


class KwargsAppendAction(argparse.Action):
    """
    Argparse action to split an argument into KEY=VALUE form
    on append to a list of dictionaries.
    """

    def __call__(self, parser, args, values, option_string=None):
        try:
            d = dict(map(lambda x: x.split("=", 1), values))
        except ValueError:
            raise argparse.ArgumentError(
                self, f'Could not parse argument "{values}" as k1=v1 k2=v2 ... format'
            )

        if getattr(args, self.dest) is None:
            setattr(args, self.dest, [])

        getattr(args, self.dest).append(d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhparametrix",
        description="Global parametrix of the multi-cut model Riemann-Hilbert problem",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Problem configuration (JSON)")
    common.add_argument("--out", help="Output directory (overrides the config)")
    common.add_argument(
        "--tol", type=float, help="Absolute and relative quadrature tolerance"
    )
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=0, help="Seed of the random test points")
    seeded.add_argument(
        "--compare",
        action="store_true",
        help="Leave the timing out of the report, for byte-wise comparisons",
    )

    subparsers.add_parser(
        "build", parents=[common, seeded], help="Build M and write its report"
    )
    subparsers.add_parser(
        "validate", parents=[common, seeded], help="Run the validation suite"
    )

    p_eval = subparsers.add_parser("eval", parents=[common], help="Evaluate M on grids")
    p_eval.add_argument(
        "--grid",
        nargs="*",
        action=KwargsAppendAction,
        metavar="KEY=VALUE",
        help="Grid spec, e.g. kind=circle radius=5 count=100; may repeat",
    )

    p_sweep = subparsers.add_parser(
        "sweep", parents=[common], help="Uniform boundedness sweep in n"
    )
    p_sweep.add_argument("--n-max", type=int, default=200)
    p_sweep.add_argument("-m", "--resolution", type=int, default=64, help="Beta-grid size per dimension")
    p_sweep.add_argument("--eps", type=float, default=0.1, help="Radius of the excluded endpoint disks")
    p_sweep.add_argument("--workers", type=int, default=1, help="Processes for the grid builds")

    subparsers.add_parser(
        "invert", parents=[common], help="Solve for the divisor points of both rows"
    )
    return parser


def run(args) -> int:
    if args.verbose:
        setup_logger(logging.DEBUG)

    problem = ProblemConfig.from_file(args.config).with_overrides(args.tol, args.out)

    if args.command == "build":
        return commands.cmd_build(problem, args.seed, args.compare)
    if args.command == "validate":
        return commands.cmd_validate(problem, args.seed, args.compare)
    if args.command == "eval":
        return commands.cmd_eval(problem, args.grid)
    if args.command == "sweep":
        return commands.cmd_sweep(
            problem, args.n_max, args.resolution, args.eps, args.workers
        )
    if args.command == "invert":
        return commands.cmd_invert(problem)
    raise ValueError(f"unknown command {args.command}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        # If no command is specified, show help
        parser.print_help()
        return commands.EXIT_OK

    try:
        return run(args)
    except (ConfigError, SurfaceConfigError) as e:
        logger.error(f"invalid configuration: {e}")
        return commands.EXIT_CONFIG
    except (EndpointEvaluationError, SheetPointError, PoleError) as e:
        logger.error(f"invalid evaluation point: {e}")
        return commands.EXIT_CONFIG
    except (
        InversionError,
        ParametrixBuildError,
        DifferentialConstructionError,
        NonConvergenceError,
        PoleCollisionError,
    ) as e:
        logger.error(f"solver failure: {e}")
        return commands.EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
