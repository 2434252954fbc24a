"""Run every builtin scenario and print one line per scenario.

    python3 scripts/run_builtins.py [--out DIR] [names ...]

Tables and summaries go to DIR/<scenario id>, as with the CLI.
"""
import argparse
import sys
import time
from pathlib import Path

from fstar.cli import main as cli_main
from fstar.config import builtin_names, load


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help="builtin names (default: all)")
    p.add_argument("--out", default="out", help="output root")
    args = p.parse_args(argv)
    names = args.names or builtin_names()
    failed = []
    for name in names:
        cmd = load(name).command
        t0 = time.perf_counter()
        code = cli_main([cmd, "--config", name, "--out", str(Path(args.out) / name)])
        print(f"== {name:28s} exit {code}  {time.perf_counter() - t0:6.1f} s", flush=True)
        if code:
            failed.append(name)
    print(f"{len(names) - len(failed)}/{len(names)} scenarios passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
