"""Command-line entry point: ``semictrl run | list-scenarios | validate``.

Exit status: 0 on success, 2 for configuration errors, 3 for solver
failures, 4 for hypothesis failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_scenarios, serialize_scenario, shipped_scenarios
from .errors import ConfigError
from .report import emit_report, render
from .runner import EXIT_CODES, run_file


def _cmd_run(args) -> int:
    records = run_file(args.config, args.seed)
    status = 0
    for rec in records:
        emit_report(rec, args.out, args.format)
        print(render(rec, args.format))
        if status == 0:
            status = rec.exit_code
    return status


def _cmd_list(args) -> int:
    for name, path in shipped_scenarios().items():
        s = load_scenarios(str(path))[0]
        print(f"{name:<28} {s.experiment}")
    return 0


def _cmd_validate(args) -> int:
    scenarios = load_scenarios(args.config)
    for s in scenarios:
        print(f"ok  {s.name} ({s.experiment})")
        if args.show:
            print(serialize_scenario(s))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semictrl", description="Steering and verification for semilinear control systems.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every scenario in a config file")
    run.add_argument("config", help="path to a YAML config, or the name of a shipped scenario")
    run.add_argument("--out", type=Path, default=Path("."), help="output directory (default: current)")
    run.add_argument("--format", choices=("table", "csv", "json"), default="table", help="stdout format")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.set_defaults(func=_cmd_run)

    ls = sub.add_parser("list-scenarios", help="list the shipped scenarios")
    ls.set_defaults(func=_cmd_list)

    val = sub.add_parser("validate", help="check a config against the schema")
    val.add_argument("config")
    val.add_argument("--show", action="store_true", help="print the normalized config")
    val.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]


if __name__ == "__main__":
    sys.exit(main())
