"""Command-line entry point: ``winhalt <subcommand> --config FILE``.

Every run writes ``run.json`` (a RunRecord) and, for csv output,
``table.csv`` into ``--out``.  Errors are printed to stderr as one JSON
object and mapped to exit codes: 2 bad config, 3 unmet precondition,
4 nothing found, 1 anything else.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigInvalid, WinHaltError
from .runner import COMMANDS, RunRecord, jsonable, load_config, load_schema, run_experiment

__all__ = ["main", "build_parser", "write_record"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="winhalt", description="Exact and sampled win "
                                     "probabilities for agent/environment halting games.")
    parser.add_argument("--version", action="version", version=f"winhalt {__version__}")
    parser.add_argument("--schema", action="store_true", help="print the config JSON schema and exit")
    sub = parser.add_subparsers(dest="subcommand")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (default: config output.dir or .)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--format", choices=["csv", "json"], default=None)
    return parser


def write_record(record: RunRecord, out: Path, fmt: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.json").write_text(json.dumps(record.to_json(), indent=2, sort_keys=True) + "\n")
    for name, payload in record.artifacts.items():
        (out / name).write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")
    if fmt == "csv":
        with open(out / "table.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(record.header)
            w.writerows(jsonable(record.rows))


def _fail(exc: WinHaltError) -> int:
    print(json.dumps(exc.to_json()), file=sys.stderr)
    return exc.exit_code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema:
        print(json.dumps(load_schema(), indent=2))
        return 0
    if args.subcommand is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        config = load_config(args.config)
        if config["subcommand"] != args.subcommand:
            raise ConfigInvalid(f"config is for {config['subcommand']!r}, not {args.subcommand!r}")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigInvalid("seed must be a u64")
        record = run_experiment(config, seed=args.seed, jobs=args.jobs)
        output = config.get("output", {})
        out = Path(args.out or output.get("dir", "."))
        write_record(record, out, args.format or output.get("format", "csv"))
    except WinHaltError as exc:
        return _fail(exc)
    except Exception as exc:  # unexpected failure; still report in JSON
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 1}),
              file=sys.stderr)
        return 1
    print(json.dumps(record.to_json()["metrics"], sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
