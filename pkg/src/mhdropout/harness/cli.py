"""Command line entry point.

    mhdropout sweep --out results/sweep --trials 30
    mhdropout sine --config sine.json --seed 3

Exit codes: 0 success, 1 configuration error, 2 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, MHDropoutError
from .config import CONFIGS, load_config, validate
from .experiments import RUNNERS
from .output import write_report

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhdropout", description="Toy studies for multiple-hypothesis dropout.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    helps = {
        "sweep": "SDD against subset ratio on the multi-point problem",
        "multipoint": "shared-weight MH network against independent predictors",
        "sine": "inverse sine wave with MoM and baselines",
        "gmm": "Gaussian-mixture parameter recovery",
        "vq-compare": "VQ against MH-VQ across codebook sizes",
    }
    for name in CONFIGS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON file overriding config defaults")
        p.add_argument("--seed", type=_u64, help="base seed; trial k uses seed + k")
        p.add_argument("--out", default=None, help="output directory (default results/<experiment>)")
        p.add_argument("--trials", type=_positive, help="number of trials")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
        p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.experiment, args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.trials is not None:
            cfg.trials = args.trials
        validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        import dataclasses

        print(json.dumps(dataclasses.asdict(cfg), indent=1))
        return EXIT_OK
    out = args.out or f"results/{args.experiment}"
    try:
        report = RUNNERS[args.experiment](cfg)
        paths = write_report(report, out)
        if not args.no_figures:
            from .plotting import render

            paths += render(report, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MHDropoutError, ArithmeticError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    print(json.dumps(report.summary, indent=1, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
