"""Command-line entry point.

Usage: contamdp <subcommand> --config <path> [--seed S] [--workers W]
       [--out DIR]

Subcommands: table1, mean-bench, regression-decay, fisher-check,
verify-prop1.  Exit codes: 0 success, 2 configuration error, 3 numerical
error, 4 batch-quality error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import BatchQualityError, ConfigurationError, ContamDPError
from .harness import RUNNERS, resolve_config

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BATCH_QUALITY = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contamdp",
        description=(
            "Differentially private Bayesian posterior sampling via data "
            "contamination: experiment drivers writing CSV outputs."
        ),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in RUNNERS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", required=True,
                         help="path to a JSON config file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="master seed (overrides the config value)")
        cmd.add_argument("--workers", type=int,
                         default=os.cpu_count() or 1,
                         help="worker pool size (default: available cores)")
        cmd.add_argument("--out", default=None,
                         help="output directory (overrides the config value)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.config)
        if cfg["kind"] != args.subcommand:
            raise ConfigurationError(
                f"config kind {cfg['kind']!r} does not match subcommand "
                f"{args.subcommand!r}"
            )
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        runner = RUNNERS[args.subcommand]
        result = runner(cfg, out_dir=args.out, workers=args.workers)
        paths = result if isinstance(result, tuple) else (result,)
        for path in paths:
            print(path)
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BatchQualityError as exc:
        print(f"batch-quality error: {exc}", file=sys.stderr)
        return EXIT_BATCH_QUALITY
    except ContamDPError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
