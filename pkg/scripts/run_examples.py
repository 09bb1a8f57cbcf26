"""Run every example job in specs/ through the CLI and summarise exit codes.

Usage: python3 scripts/run_examples.py [--out-dir reports/]
"""

import argparse
import contextlib
import io
import sys
from pathlib import Path

from egren.cli import main

ROOT = Path(__file__).resolve().parent.parent


def command_for(path: Path) -> str:
    return path.stem.split("_")[0]


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default=None, help="keep each JSON report here")
    args = ap.parse_args()
    failures = 0
    for spec in sorted((ROOT / "specs").glob("*.json")):
        argv = [command_for(spec), "--spec", str(spec)]
        if args.out_dir:
            argv += ["--out", str(Path(args.out_dir) / spec.name)]
        with contextlib.redirect_stdout(io.StringIO()):
            code = main(argv)
        failures += code != 0
        print(f"{spec.name:28s} exit {code}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(run())
