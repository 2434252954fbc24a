"""Command line scenario runner.

    fstar <subcommand> --config <path|builtin> [--seed N] [--out DIR] [--format csv|json]
    fstar list

Exit status: 0 when every check passes, 1 when a check fails, 2 for config
errors (reported with a JSON pointer to the offending field).  The outputs
in ``--out`` are ``summary.json`` and one table per artifact; both are
byte-identical across runs with the same config and seed.  Wall-clock
timings go to a separate ``timings.json``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import COMMANDS, ConfigError, builtin_names, load
from .scenarios import run
from .tables import emit_table  # noqa: F401  (re-exported for scripts)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fstar", description="Run a scenario and write its tables and summary.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=f"run a {name} scenario")
        s.add_argument("--config", required=True, help="config file or builtin name (see `fstar list`)")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--out", default=None, help="output directory (default out/<scenario id>)")
        s.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    sub.add_parser("list", help="list builtin configs")
    return p


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        for name in builtin_names():
            print(name)
        return EXIT_PASS
    try:
        scn = load(args.config, args.seed)
        if scn.command != args.command:
            raise ConfigError("/command", f"config is for '{scn.command}', not '{args.command}'")
        result = run(scn)
    except ConfigError as exc:
        print(f"config error at {exc.pointer}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or Path("out") / scn.id)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "json"
    files = {}
    for name, table in sorted(result.tables.items()):
        files[name] = emit_table(table, out / f"{name}.{ext}", args.format).name
    summary = {
        "scenario": scn.id,
        "command": scn.command,
        "seed": scn.seed,
        "passed": result.passed,
        "checks": [c.to_dict() for c in result.checks],
        "tables": files,
        "report": result.report,
    }
    (out / "summary.json").write_text(_dump(_plain(summary)))
    (out / "timings.json").write_text(_dump({k: round(v, 6) for k, v in sorted(result.timings.items())}))
    for c in result.checks:
        print(c.line())
    print(f"{'PASS' if result.passed else 'FAIL'} {scn.id} ({len(result.checks)} checks) -> {out}")
    return EXIT_PASS if result.passed else EXIT_FAIL


def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


if __name__ == "__main__":
    sys.exit(main())
