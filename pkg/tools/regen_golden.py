"""Rewrite tests/golden/<name>.json from every config in configs/.

Run only after a deliberate change to a metric; the replay test compares
against these files.
"""
import json
import sys
from pathlib import Path

from winhalt.runner import load_config, run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main(names):
    for path in sorted((ROOT / "configs").glob("*.json")):
        if names and path.stem not in names:
            continue
        record = run_experiment(load_config(path)).to_json()
        record.pop("wall_time")
        out = ROOT / "tests" / "golden" / path.name
        out.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        print(path.stem, "ok")


if __name__ == "__main__":
    main(sys.argv[1:])
