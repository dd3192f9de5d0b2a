"""Command-line entry point.

Exit codes: 0 success, 2 admissibility or hypothesis failure (including
unusable configs), 3 numerical failure (divergence, non-convergent
quadrature).
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import load_config
from .errors import AdmissibilityError, NumericalError
from .experiments import (cmd_contraction, cmd_moments, cmd_poc_scaling,
                          cmd_rates, cmd_validate)

_SIM_COMMANDS = ("contraction", "poc-scaling", "moments")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to the experiment config file")
    p.add_argument("--out", default="out", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker processes for the experiment matrix")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mckean",
        description="Simulation and verification toolkit for weakly "
                    "interacting mean-field particle systems")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("rates", "derive contraction radii, rate constant, and the distance transform"),
        ("validate", "audit model assumptions and the transform inequality"),
        ("contraction", "coupled distance versus time against the decay envelope"),
        ("poc-scaling", "plateau distance versus N with log-log slope fit"),
        ("moments", "second-moment trajectories against the uniform bound"),
    ):
        _add_common(sub.add_parser(name, help=desc))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.command in _SIM_COMMANDS and cfg.experiment != args.command:
            raise ValueError(
                f"config declares experiment '{cfg.experiment}' but the "
                f"'{args.command}' command was invoked")
        if args.command == "rates":
            cmd_rates(cfg, args.out)
        elif args.command == "validate":
            cmd_validate(cfg, args.out)
        elif args.command == "contraction":
            cmd_contraction(cfg, args.out, threads=args.threads)
        elif args.command == "poc-scaling":
            cmd_poc_scaling(cfg, args.out, threads=args.threads)
        else:
            cmd_moments(cfg, args.out, threads=args.threads)
    except (AdmissibilityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
