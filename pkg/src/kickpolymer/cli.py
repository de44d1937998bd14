"""Command-line entry point.

Settings are layered: built-in defaults, then ``--config`` file, then
``KICKPOLYMER_*`` environment variables, then command-line flags.  The exit
code is 0 when every ledger entry passes, 1 when any fails and 2 on a
configuration error (nothing is written in that case).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .experiments import KINDS, ConfigError, ExperimentConfig, parse_config_text, run_experiment

# flag name -> (config key, parser)
FLAGS = {"seed": ("seed", int), "out": ("out", str), "threads": ("threads", int),
         "dx": ("dx", float), "window": ("window", float)}
ENV_PREFIX = "KICKPOLYMER_"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kickpolymer", description="Directed polymers and kick-forced Burgers experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} campaign")
        sp.add_argument("--config", help="key = <json> configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--dx", type=float)
        sp.add_argument("--window", type=float, help="half-width of a symmetric window")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                        help="override any configuration key")
    return ap


def _raw_env(environ) -> tuple[dict, list]:
    vals, problems = {}, []
    for flag, (key, typ) in FLAGS.items():
        raw = environ.get(ENV_PREFIX + flag.upper())
        if raw is None:
            continue
        try:
            vals[key] = typ(raw)
        except ValueError:
            problems.append((ENV_PREFIX + flag.upper(), f"cannot parse {raw!r}"))
    return vals, problems


def resolve_config(args, environ=None) -> ExperimentConfig:
    environ = os.environ if environ is None else environ
    values, problems = {}, []
    if args.config:
        try:
            values.update(parse_config_text(Path(args.config).read_text()))
        except OSError as e:
            problems.append(("config", str(e)))
        except ConfigError as e:
            problems.extend(e.problems)
    if values.get("kind", args.command) != args.command:
        problems.append(("kind", f"config file says {values['kind']!r} but the subcommand is {args.command!r}"))
    values["kind"] = args.command
    env_vals, env_problems = _raw_env(environ)
    values.update(env_vals)
    problems.extend(env_problems)
    for flag, (key, _) in FLAGS.items():
        if getattr(args, flag) is not None:
            values[key] = getattr(args, flag)
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            problems.append((item, "expected KEY=JSON"))
            continue
        try:
            values[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            problems.append((key.strip(), f"value {raw!r} is not valid JSON"))
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig.from_mapping(values)


def main(argv=None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args, environ)
    except ConfigError as e:
        for key, msg in e.problems:
            print(f"config error: {key}: {msg}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    sys.stdout.write(report.ledger.text())
    print(f"{'ALL PASS' if report.passed else 'FAILURES'}: artifacts in {cfg.out}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
