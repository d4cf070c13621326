"""Command line entry point: ``conewave {run,sweep,constants} --config FILE``.

Exit codes: 0 clean completion, 2 invalid configuration, 3 numerical
blow-up detected (a successful experiment outcome).
"""
from __future__ import annotations

import argparse
import logging
from dataclasses import replace
from pathlib import Path
import sys

from .harness import (
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    build_model,
    compute_constants,
    format_summary,
    parse_config,
    parse_sweep_config,
    run,
    sweep,
)
from .series import format_float


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conewave", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "simulate one configuration"),
        ("sweep", "run a parameter sweep and write a phase table"),
        ("constants", "print the well constants"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides init.seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep":
            cfg = parse_sweep_config(text)
            if args.seed is not None:
                cfg = replace(cfg, base=replace(cfg.base, seed=args.seed))
            path = sweep(cfg, args.out)
            print(path)
            return EXIT_OK
        cfg = parse_config(text)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.command == "constants":
            constants = compute_constants(cfg, build_model(cfg))
            values = {k: format_float(v) for k, v in constants.as_dict().items()}
            sys.stdout.write(format_summary(values))
            return EXIT_OK
        outcome = run(cfg, args.out)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{outcome.classification}: {outcome.series_path}, {outcome.summary_path}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
