"""Command-line scenario runner: ``cvcz run | list | validate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .runner import run, to_csv, to_json
from .scenario import ConfigError, PhysicsError, bundled_names, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_DISAGREE = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvcz", description="Cluster-state CZ gate scenarios.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and print its result table")
    r.add_argument("--scenario", required=True, help="scenario file or bundled name")
    r.add_argument("--engine", choices=("covariance", "montecarlo", "both"))
    r.add_argument("--shots", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--out", type=Path, help="also write the table to this file")
    r.add_argument("--format", choices=("csv", "json"), default="csv")

    sub.add_parser("list", help="list bundled scenarios")

    v = sub.add_parser("validate", help="check scenario files without running them")
    v.add_argument("paths", nargs="+")
    return p


def _cmd_run(args) -> int:
    sc = load_scenario(args.scenario).with_overrides(args.engine, args.shots, args.seed, args.workers)
    result = run(sc)
    text = to_json(result) if args.format == "json" else to_csv(result.rows)
    sys.stdout.write(text)
    if args.out:
        args.out.write_text(text)
    if result.mismatches:
        for m in result.mismatches:
            print(
                f"engine disagreement: {m.quantity} covariance={m.covariance!r} "
                f"montecarlo={m.montecarlo!r} ({m.sigmas:.1f} SE)",
                file=sys.stderr,
            )
        return EXIT_DISAGREE
    return EXIT_OK


def _cmd_list(args) -> int:
    for name in bundled_names():
        sc = load_scenario(name)
        print(f"{name}\t{sc.description}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    worst = EXIT_OK
    for path in args.paths:
        try:
            load_scenario(path)
            print(f"{path}: ok")
        except ConfigError as exc:
            print(f"{path}: config error: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_CONFIG)
        except PhysicsError as exc:
            print(f"{path}: physics error: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_PHYSICS)
    return worst


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "list": _cmd_list, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
