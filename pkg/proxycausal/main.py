#!/usr/bin/env python3
"""
proxycausal - discover treatment effects and estimate them with proxies.
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.logging import RichHandler

from . import commands
from .errors import ConfigError, ProxyCausalError, UsageError
from .models.config import apply_overrides, default_config, load_config, parse_target
from .views.report import render_benchmark, render_discovery, render_simulation, render_summary

logger = logging.getLogger("proxycausal")

COMMANDS = {
    "simulate": (commands.cmd_simulate, render_simulation),
    "discover": (commands.cmd_discover, render_discovery),
    "estimate": (commands.cmd_estimate, render_summary),
    "pipeline": (commands.cmd_pipeline, render_summary),
    "benchmark": (commands.cmd_benchmark, render_benchmark),
}

EXIT_USAGE = 2
EXIT_FAILURE = 1


class ArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so that usage errors share the error format."""

    def error(self, message):
        raise UsageError(message)


def _bins(text: str) -> tuple:
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bins must look like 15,8,5, got {text!r}")
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"bins must be three counts, got {text!r}")
    return values


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON configuration file")
    common.add_argument("--seed", type=int, help="run seed; all randomness derives from it")
    common.add_argument("--jobs", type=int, help="worker count")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only, no summary")

    source = common.add_argument_group("dataset")
    source.add_argument("--scenario", help="built-in scenario, e.g. synthetic-main")
    source.add_argument("--csv", dest="csv_path", help="CSV file with name:role headers")
    source.add_argument("-n", "--n", type=int, help="sample size for scenarios")
    source.add_argument("--random-links", action="store_true", default=None,
                        help="draw the synthetic-main treatment links at random")
    source.add_argument("--link-seed", type=int, help="seed of the random links")

    testing = common.add_argument_group("discovery")
    testing.add_argument("--bins", type=_bins, help="M,N,L bin counts")
    testing.add_argument("--strategy", choices=("quantile", "uniform"))
    testing.add_argument("--alpha", type=float, help="significance level")
    testing.add_argument("--proxy-rule", choices=("smallest-index", "majority-vote"))

    estimation = common.add_argument_group("estimation")
    estimation.add_argument("--target", help="treated variables and outcome, e.g. A1,A3->Y1")
    estimation.add_argument("--z", help="treatment-inducing proxy (implies explicit proxies)")
    estimation.add_argument("--w", help="outcome-inducing proxy (implies explicit proxies)")
    estimation.add_argument("--oracle-proxies", action="store_true", default=None,
                            help="use the known proxies of the synthetic-main targets")
    estimation.add_argument("--lambda-h", type=float)
    estimation.add_argument("--lambda-q", type=float)
    estimation.add_argument("--disable-q", action="store_true", default=None,
                            help="drop the treatment bridge (outcome-bridge-only curve)")
    estimation.add_argument("--bridges", metavar="DIR",
                            help="reuse bridge_h.json / bridge_q.json from an earlier estimate")
    estimation.add_argument("--grid", type=float, nargs="+", help="doses")
    estimation.add_argument("--grid-points", type=int, help="points of the default grid on [0, 1]")
    estimation.add_argument("--replicates", type=int, help="Monte Carlo draws per ground-truth point")

    bench = common.add_argument_group("benchmark")
    bench.add_argument("--reps", type=int, help="replicates")
    bench.add_argument("--study", choices=("table", "discovery", "calibration", "bins", "noise"))
    bench.add_argument("--bin-sweep", type=_bins, action="append", help="bin setting, repeatable")

    parser = ArgumentParser(prog="proxycausal", description=__doc__.strip())
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    for name, (function, _) in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=function.__doc__.strip().splitlines()[0])
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Config fields given on the command line; None marks an absent flag."""
    overrides = {
        key: getattr(args, key)
        for key in ("seed", "jobs", "out", "scenario", "csv_path", "n", "random_links", "link_seed",
                    "bins", "strategy", "alpha", "proxy_rule", "z", "w", "oracle_proxies",
                    "lambda_h", "lambda_q", "disable_q", "bridges", "grid", "grid_points", "replicates",
                    "reps", "study", "bin_sweep")
    }
    if args.target:
        overrides["treated"], overrides["outcome"] = parse_target(args.target)
    if args.z or args.w:
        overrides["proxy_mode"] = "explicit"
    return overrides


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Install a single RichHandler on the package logger."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logger.handlers.clear()
    logger.addHandler(RichHandler(console=Console(stderr=True), show_path=False))
    logger.setLevel(level)
    logger.propagate = False


def run(argv: Optional[List[str]] = None) -> Dict[str, Any]:
    """Parse arguments, build the config and run one command."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    config = default_config()
    if args.config:
        config = load_config(args.config, config)
    config = apply_overrides(config, overrides_from_args(args))
    if args.csv_path and config.scenario and not args.scenario:
        config = config.update(scenario=None)

    function, render = COMMANDS[args.command]
    logger.debug("running %s", args.command)
    result = function(config)
    if not args.quiet:
        Console().print(render(result))
    return result


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application."""
    try:
        run(argv)
    except ProxyCausalError as e:
        print(f"error: {e.category}: {e}", file=sys.stderr)
        return EXIT_USAGE if isinstance(e, (UsageError, ConfigError)) else EXIT_FAILURE
    except OSError as e:
        print(f"error: io-error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
