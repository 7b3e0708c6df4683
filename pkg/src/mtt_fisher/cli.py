"""Experiment runner CLI.

``mtt-fisher run config.json [--scale F] [--out DIR] [--threads N]`` writes
``results.csv`` (long format) and ``manifest.json`` (resolved config, seed,
git hash, wall time) into the output directory.  ``validate`` checks a
config without running it; ``list-experiments`` prints the catalog.
Exit codes: 0 success, 2 invalid config, 3 numerical collapse.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import jsonschema

from . import __version__, kernels
from .errors import ConfigError, NumericalCollapseError
from .experiments import CSV_COLUMNS, EXPERIMENTS, run_experiment

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment", "seed"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string", "enum": sorted(EXPERIMENTS)},
        "seed": {"type": "integer"},
        "params": {"type": "object"},
    },
}


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if isinstance(raw, dict) and "seed" not in raw:
        raise ConfigError("seed required")
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    return raw


def resolve_config(raw: dict) -> dict:
    exp = EXPERIMENTS[raw["experiment"]]
    params = dict(exp.defaults)
    for key, value in raw.get("params", {}).items():
        if key not in exp.defaults:
            raise ConfigError(
                f"unknown parameter {key!r} for experiment {raw['experiment']!r}"
            )
        params[key] = value
    return {"experiment": raw["experiment"], "seed": raw["seed"], "params": params}


def _git_hash() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=10,
            cwd=Path(__file__).resolve().parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def cmd_run(args) -> int:
    config = resolve_config(load_config(args.config))
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("MTT_FISHER_THREADS", "1"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rows = run_experiment(
        config["experiment"],
        config["params"],
        config["seed"],
        scale=args.scale,
        threads=threads,
    )
    wall = time.time() - started

    csv_path = out_dir / "results.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_list())
    manifest = {
        "config": config,
        "seed": config["seed"],
        "scale": args.scale,
        "threads": threads,
        "git_hash": _git_hash(),
        "wall_time_s": wall,
        "kernel_backend": kernels.BACKEND,
        "version": __version__,
        "results": csv_path.name,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {csv_path} ({len(rows)} rows) in {wall:.1f}s")
    return 0


def cmd_validate(args) -> int:
    config = resolve_config(load_config(args.config))
    print("OK")
    print(json.dumps(config, indent=2, sort_keys=True))
    return 0


def cmd_list(_args) -> int:
    for name in sorted(EXPERIMENTS):
        exp = EXPERIMENTS[name]
        print(f"{name}: {exp.description}")
        print(f"  defaults: {json.dumps(exp.defaults)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtt-fisher",
        description="Monte Carlo information-loss and MLE experiments for "
        "multi-target observation models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="path to the experiment JSON config")
    run_p.add_argument("--scale", type=float, default=1.0, help="sample-count multiplier")
    run_p.add_argument("--out", default=".", help="output directory")
    run_p.add_argument("--threads", type=int, default=None, help="worker processes")
    run_p.set_defaults(fn=cmd_run)

    val_p = sub.add_parser("validate", help="check a config without running")
    val_p.add_argument("config")
    val_p.set_defaults(fn=cmd_validate)

    list_p = sub.add_parser("list-experiments", help="print the catalog")
    list_p.set_defaults(fn=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalCollapseError as exc:
        print(f"numerical collapse: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
