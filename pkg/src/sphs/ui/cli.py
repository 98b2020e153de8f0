"""CLI interface - subcommands, logging setup and exit codes"""

import argparse
import logging
import sys

from sphs.core.errors import (
    ConfigurationError,
    DataError,
    DivergenceError,
    StructuralError,
    UnsupportedOperationError,
)
from sphs.core.presets import display_preset_table
from sphs.io.config import config, load_run_spec
from sphs.ui.commands import COMMANDS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIGURATION = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4

DESCRIPTIONS = {
    "generate": "Generate synthetic training trajectories",
    "train": "Train model instances from a run specification",
    "predict": "Integrate a trained model from an initial state",
    "eval": "RMSE and interquartile statistics of predictions",
    "verify": "Check the stability conditions of a trained model",
    "decompose": "Conservative, dissipative and input parts of the vector field",
    "pod": "Fit a POD basis and encode snapshots",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sphs", description="Stable port-Hamiltonian neural network models of dynamical systems"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, description in DESCRIPTIONS.items():
        sub = subparsers.add_parser(name, help=description, description=description)
        sub.add_argument("--spec", help="JSON run specification")
        sub.add_argument("--seed", type=int, help="Override the run seed")
        sub.add_argument("--out", help="Override the output path")
        if name == "train":
            sub.add_argument("--steps", type=int, help="Override train.steps")
        if name == "generate":
            sub.add_argument("--mu", type=float, help="Override the rigid body damping")
        verbosity = sub.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
        verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    subparsers.add_parser("presets", help="List the experiment presets")
    return parser


def configure_logging(args):
    if getattr(args, "verbose", False):
        config.set_log_level("DEBUG")
    elif getattr(args, "quiet", False):
        config.set_log_level("WARNING")
    logging.basicConfig(
        level=getattr(logging, config.log_level),
        format="%(asctime)s - %(levelname)s - %(message)s",
        datefmt="%H:%M:%S",
    )


def run(args):
    """Dispatch a parsed command line; returns the command summary"""
    if args.command == "presets":
        display_preset_table()
        return None
    overrides = {"seed": args.seed, "out": args.out}
    for key in ("steps", "mu"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    spec = load_run_spec(args.command, args.spec, overrides)
    logger.info("Running %s", args.command)
    return COMMANDS[args.command](spec)


def main(argv=None):
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        config.reload_environment()
        configure_logging(args)
        run(args)
    except (ConfigurationError, StructuralError, UnsupportedOperationError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIGURATION
    except (DataError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
