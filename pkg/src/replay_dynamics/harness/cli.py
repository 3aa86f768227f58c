"""Command-line entry point.

Each subcommand builds an ``ExperimentConfig`` from ``--config`` (a flat JSON
object) plus ``--set key=value`` overrides and writes its result as CSV or
JSON. Failures exit with status 1 (2 for usage errors) after printing one
JSON line ``{"error": ..., "message": ...}`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .config import ExperimentConfig
from .experiments import compare_per, run_aer, run_analytic, run_dqn, run_linesearch, run_ode, sweep_M
from .output import FORMATS, emit, write

COMMANDS = {
    "run": "simulate LineSearch agents (seed-averaged metric trace)",
    "ode": "integrate the theory curve",
    "analytic": "evaluate a closed-form curve",
    "sweep": "measure M over the (N, m) grid",
    "compare-per": "difference ER and pER sweeps",
    "aer": "adaptive memory against a fixed baseline",
    "dqn": "train a Q-network on a control task",
}

# mode forced by each subcommand (None leaves the config's choice)
_MODES = {"run": "simulate", "ode": "ode", "analytic": "analytic", "sweep": None, "compare-per": None}


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replay-dynamics", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat JSON file of ExperimentConfig fields")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=FORMATS, default="csv")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values = json.load(fh)
        if not isinstance(values, dict):
            raise ValueError(f"{args.config}: config must be a flat JSON object")
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        values[key] = _parse_value(raw)
    if args.seed is not None:
        values["seed"] = args.seed
    mode = _MODES.get(args.command)
    if mode:
        values["mode"] = mode
    elif args.command in ("sweep", "compare-per"):
        values.setdefault("mode", "ode")
    return ExperimentConfig.from_mapping(values)


def execute(command: str, cfg: ExperimentConfig):
    if command == "run":
        return run_linesearch(cfg)
    if command == "ode":
        return run_ode(cfg)
    if command == "analytic":
        return run_analytic(cfg)
    if command == "sweep":
        return sweep_M(cfg)
    if command == "compare-per":
        return compare_per(cfg)
    if command == "aer":
        # the adaptive run of the first repetition; the baseline is summarized on stderr
        pairs = run_aer(cfg)
        wins = sum(_score(p.adaptive, cfg) >= _score(p.fixed, cfg) for p in pairs)
        print(json.dumps({"aer_wins": int(wins), "runs": len(pairs)}), file=sys.stderr)
        return pairs[0].adaptive
    if command == "dqn":
        return run_dqn(cfg)
    raise ValueError(f"unknown command {command!r}")


def _score(trace, cfg: ExperimentConfig) -> float:
    # higher is better: mean return on control tasks, -M on LineSearch
    if cfg.environment == "linesearch":
        return -trace.final_M
    return trace.mean_return


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        result = execute(args.command, cfg)
        if args.out:
            emit(result, args.out, args.format)
        else:
            write(result, sys.stdout, args.format)
    except Exception as exc:  # report every failure as one parsable line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
