import argparse
import sys

from .cli import COMMANDS, CliOptions
from .config import LogisticSection, load_config, parse_logistic_override
from .constants import APP_DESCRIPTION, APP_NAME, APP_VERSION
from .errors import EXIT_OK, EXIT_USAGE, ConfigError, LVCertError, exit_code_for
from .log import get_logger, set_verbosity

logger = get_logger(__name__)


class UsageParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with ``EXIT_USAGE`` instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [system], [solver], [geometry], [output]")
    common.add_argument("--out", help="output directory (overrides [output] directory)")
    common.add_argument("--seed", type=int, help="seed for random Newton restarts")
    common.add_argument("--jobs", type=int, help="worker threads for sweeps and indices")
    common.add_argument("--force", action="store_true", help="overwrite existing output files")
    common.add_argument("--k", type=int, dest="K", help="Fourier truncation of the orbit finder")
    common.add_argument("--j", type=int, help="element of Phi(n1, n2) selecting the lambda window")
    common.add_argument(
        "--logistic",
        nargs="*",
        metavar="KEY=VALUE",
        help="scalar logistic mode, e.g. --logistic alpha=1.7 tau=1",
    )
    common.add_argument("--plot", action="store_true", help="also write PNG plots")
    common.add_argument(
        "--perturbation", type=float, default=0.01, help="relative offset of the simulated history from b"
    )
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = UsageParser(prog=APP_NAME, description=APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "evaluate the hypotheses and write hypotheses.txt",
        "spectrum": "winding numbers, lambda window and catalog.csv",
        "simulate": "integrate the delay system and estimate its period",
        "find": "collocation + Newton for periodic orbits, orbit.csv and verification.txt",
        "certify": "orbit indices and the existence certificate",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def run(argv=None, echo=print):
    """Parse *argv*, run the command and return its exit code."""
    args = build_parser().parse_args(argv)
    set_verbosity(args.verbose)
    try:
        config, logistic = _load(args)
        opts = CliOptions(
            out=args.out,
            force=args.force,
            plot=args.plot,
            j=args.j,
            logistic=logistic,
            perturbation=args.perturbation,
            echo=echo,
        )
        return COMMANDS[args.command](config, opts)
    except LVCertError as exc:
        logger.error("%s", exc)
        echo(f"error: {exc}")
        return exit_code_for(exc)


def _load(args):
    logistic = None
    if args.logistic is not None:
        logistic = parse_logistic_override(args.logistic) if args.logistic else LogisticSection()
    if args.config:
        config = load_config(args.config)
    elif args.command == "simulate" and logistic is not None:
        return None, logistic
    else:
        raise ConfigError("--config is required")
    config = config.with_overrides(seed=args.seed, jobs=args.jobs, K=args.K).with_output(args.out)
    return config, logistic


def main():
    sys.exit(run() or EXIT_OK)


if __name__ == "__main__":
    main()
