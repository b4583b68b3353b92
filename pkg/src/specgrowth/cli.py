"""Command-line front end.

Loads an optional TOML config file, overlays any flags given on the
command line, validates the merged settings, and runs the experiment.
Exit status: 0 all suites passed, 2 a suite failed, 1 bad configuration
or runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, SpecGrowthError
from .runner import (
    VALID_MODELS,
    VALID_SCHEMES,
    VALID_SUITES,
    read_config_file,
    run_experiment,
    validate_config,
)


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports bad flags as config errors (exit 1)."""

    def error(self, message):
        raise ConfigError(f"arguments: {message}")


def _build_parser():
    parser = _Parser(
        prog="specgrowth",
        description=(
            "Spectral simulator for time-periodic Schrodinger models with "
            "polynomial Sobolev-norm growth, plus verification suites."
        ),
    )
    parser.add_argument("--config", help="path to a TOML config file")
    parser.add_argument(
        "--model", help=f"model kind: one of {', '.join(VALID_MODELS)}"
    )
    parser.add_argument(
        "--modes",
        type=int,
        help="mode count (N for harmonic; J for the torus models, N = 2J+1)",
    )
    parser.add_argument("--delta", type=float, help="harmonic coupling strength")
    parser.add_argument("--epsilon", type=float, help="torus potential amplitude")
    parser.add_argument("--mass", type=float, help="zoll-surrogate mass parameter")
    parser.add_argument(
        "--lambda", dest="lam", type=float, help="halfwave spectral shift"
    )
    parser.add_argument("--tend", type=float, help="final time")
    parser.add_argument("--dt", type=float, help="stepper time step")
    parser.add_argument(
        "--scheme", help=f"propagation scheme: one of {', '.join(VALID_SCHEMES)}"
    )
    parser.add_argument(
        "--orders", help="comma-separated Sobolev orders to record, e.g. 1,2"
    )
    parser.add_argument(
        "--suites", help=f"comma-separated suites from: {', '.join(VALID_SUITES)}"
    )
    parser.add_argument("--out", help="output directory for growth.csv and summary.txt")
    parser.add_argument("--seed", type=int, help="seed for the randomized checks")
    return parser


_FLAG_TO_KEY = {
    "model": "model",
    "modes": "modes",
    "delta": "delta",
    "epsilon": "epsilon",
    "mass": "mass",
    "lam": "lambda",
    "tend": "tend",
    "dt": "dt",
    "scheme": "scheme",
    "orders": "orders",
    "suites": "suites",
    "out": "out",
    "seed": "seed",
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        raw = read_config_file(args.config) if args.config else {}
        for attr, key in _FLAG_TO_KEY.items():
            value = getattr(args, attr)
            if value is not None:
                raw[key] = value
        config = validate_config(raw)
        return run_experiment(config)
    except SpecGrowthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
