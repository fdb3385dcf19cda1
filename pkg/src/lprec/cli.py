"""Command-line entry point.

    lprec run          --config CFG [overrides]   run the experiment the config describes
    lprec sweep        --config CFG [overrides]   format x policy sweep
    lprec bounds-check --config CFG [overrides]   validate the convergence bounds
    lprec cancellation --config CFG [overrides]   cancellation-rate study
    lprec formats      [--format F]               print format constants

Overrides: ``--format``, ``--policy``, ``--seed``, ``--steps``, ``--out``.
Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure
(a non-finite value aborted an arm), 3 a bounds check found violations.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from lprec.errors import ConfigError, NonFiniteError
from lprec.floatsim import PRESETS, parse_format
from lprec.harness.config import ExperimentConfig, load_config
from lprec.harness.experiments import run_experiment

__all__ = ["main", "cli_main", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERIC", "EXIT_VIOLATION"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION = 0, 1, 2, 3

# subcommand -> kind forced on the loaded config (None keeps the config's kind)
_COMMAND_KIND = {
    "run": None,
    "sweep": "format-sweep",
    "bounds-check": "bounds-check",
    "cancellation": "cancellation",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for numerical failures
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lprec", description="Simulated low-precision training experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in _COMMAND_KIND:
        p = sub.add_parser(name, help=f"{name} experiment")
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--format", help="number format, e.g. E8M7 or bf16")
        p.add_argument("--policy", help="weight-update policy")
        p.add_argument("--seed", type=int, help="run a single seed")
        p.add_argument("--steps", type=int, help="number of training steps")
        p.add_argument("--out", help="output directory")
    p = sub.add_parser("formats", help="print format constants")
    p.add_argument("--format", action="append", help="format to describe (repeatable)")
    return parser


def _config_for(args: argparse.Namespace) -> ExperimentConfig:
    forced = _COMMAND_KIND[args.command]
    if args.config:
        cfg = load_config(args.config)
        if forced is not None and cfg.kind != forced:
            cfg = ExperimentConfig.from_dict({**_explicit(cfg), "kind": forced})
    else:
        cfg = ExperimentConfig.for_kind(forced or "lsq-figure")
    if args.format is not None:
        parse_format(args.format)
    if cfg.kind == "format-sweep":
        # on a sweep the single-value flags narrow the swept lists
        cfg = cfg.with_overrides(
            formats=[args.format] if args.format is not None else None,
            policies=[args.policy] if args.policy is not None else None,
        )
    return cfg.with_overrides(
        format=args.format,
        policy=args.policy,
        seeds=[args.seed] if args.seed is not None else None,
        steps=args.steps,
        output_path=args.out,
    )


def _explicit(cfg: ExperimentConfig) -> dict:
    # fields that differ from the defaults of the config's own kind
    base = ExperimentConfig.for_kind(cfg.kind).to_dict()
    return {k: v for k, v in cfg.to_dict().items() if k != "kind" and base[k] != v}


def _print_formats(names: Sequence[str] | None) -> None:
    fmts = [parse_format(n) for n in names] if names else list(dict.fromkeys(PRESETS.values()))
    print(f"{'format':<8} {'bits':>4} {'eps':>12} {'max':>14} {'min_normal':>14} {'min_subnormal':>14}")
    for f in fmts:
        print(
            f"{f.name:<8} {f.width:>4} {f.machine_epsilon:>12.6g} {f.max_finite:>14.6g} "
            f"{f.min_positive_normal:>14.6g} {f.min_positive_subnormal:>14.6g}"
        )


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "formats":
            _print_formats(args.format)
            return EXIT_OK
        cfg = _config_for(args)
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"lprec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteError as exc:
        print(f"lprec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for line in report.lines:
        print(line)
    print(f"wrote {len(report.files)} file(s) to {report.out_dir}")
    if report.violations:
        return EXIT_VIOLATION
    if report.numerical_failure:
        # a sweep flags failed arms as data; it only fails when nothing ran
        if cfg.kind != "format-sweep" or all(not a.ok for a in report.arms):
            return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())
