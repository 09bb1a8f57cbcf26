"""Command-line front end: ``egren <command> --spec job.json [--out report.json]``.

Exit codes: 0 when a verdict or value was produced, 2 for malformed or
invalid specifications, 3 when a numerical procedure failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .jobs import COMMANDS, JobSpec, NumericalFailure, SpecError, run_job

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_NUMERIC = 3

_HELP = {
    "sd": "estimate the scaling degree at the origin or transversally to the diagonal",
    "extend": "extend a kernel across the origin or the total diagonal",
    "wf": "wavefront-set membership, cone products and restrictions",
    "cover": "covering set, members and partition weights of a point configuration",
    "glue": "gluing consistency and causal factorization normal forms",
    "wick": "Wick expansion of a product of powers",
    "classify": "power-counting classification of an interaction",
    "probe": "Fourier decay exponents of a localized kernel",
}


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_job(command: str, spec_path: str, seed: int | None, tol: float | None) -> JobSpec:
    try:
        text = sys.stdin.read() if spec_path == "-" else Path(spec_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec is not valid JSON: {exc}") from None
    if isinstance(obj, dict) and "echo" in obj and "result" in obj:
        # a previous report: re-run its echoed job
        echo = obj["echo"]
        if not isinstance(echo, dict) or echo.get("command") != command:
            raise SpecError(f"report was produced by {echo.get('command')!r}, not {command!r}")
        job = JobSpec.from_echo(echo)
        if seed is not None:
            job.seed = seed
        if tol is not None:
            job.tol = tol
        return job
    return JobSpec(command, obj, 0 if seed is None else seed, tol)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="egren", description="Workbench for distribution extension, "
                                     "causal configurations, wavefront cones and Wick power counting.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--spec", required=True, help="job JSON file, a previous report, or - for stdin")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized probes (default 0)")
        p.add_argument("--tol", type=float, default=None,
                       help="relative tolerance; overrides EGREN_TOL_PROFILE (fast|default|strict)")
        p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
        p.add_argument("--csv", default=None, help="write tabular samples here (sd only)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = _load_job(args.command, args.spec, args.seed, args.tol)
        report = run_job(job)
    except SpecError as exc:
        print(f"egren: invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except NumericalFailure as exc:
        print(f"egren: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = report.dumps()
    if args.out:
        _atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if args.csv:
        csv = report.csv_text()
        if csv is None:
            print(f"egren: {args.command} has no tabular output; --csv ignored", file=sys.stderr)
        else:
            _atomic_write(Path(args.csv), csv)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
