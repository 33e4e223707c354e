"""Command-line driver: ``ncphase <experiment> --config <path> --out <dir>``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from .core import ConfigError, load_config
from .experiments import EXPERIMENTS, SETTING_KEYS, ExperimentResult, parse_settings, run_experiment

log = logging.getLogger("ncphase")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def summary_text(result: ExperimentResult) -> str:
    lines = [f"experiment: {result.name}"]
    lines += [c.line() for c in result.checks]
    if not result.converged:
        lines.append("FAIL  solvers (Lanczos residual contract): eigensolver did not converge; tables are partial")
    lines += [f"note: {n}" for n in result.notes]
    lines.append(f"overall: {'PASS' if result.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def write_outputs(result: ExperimentResult, out_dir: Path, plots: bool = True) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(result.tables.items()):
        path = out_dir / name
        write_atomic(path, text)
        written.append(path)
    path = out_dir / "summary.txt"
    write_atomic(path, summary_text(result))
    written.append(path)
    if plots:
        from .plots import render

        written += render(result, out_dir)
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncphase",
        description="Run a batch experiment on the rotationally invariant noncommutative phase-space model.",
    )
    parser.add_argument("experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    parser.add_argument("--config", required=True, help="key=value parameter file")
    parser.add_argument("--out", required=True, help="output directory for CSV tables and summary.txt")
    parser.add_argument("--seed", type=int, default=None, help="overrides the seed key of the config")
    parser.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.experiment not in EXPERIMENTS:
        print(f"unknown experiment {args.experiment!r}; valid names: {', '.join(EXPERIMENTS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        params, extras = load_config(args.config, SETTING_KEYS)
        if args.seed is not None:
            extras["seed"] = str(args.seed)
        settings = parse_settings(extras)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"bad config: {exc}{key}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_experiment(args.experiment, params, settings)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"bad config for {args.experiment}: {exc}{key}", file=sys.stderr)
        return EXIT_USAGE
    write_outputs(result, Path(args.out), plots=not args.no_plots)
    sys.stdout.write(summary_text(result))
    if not result.converged:
        return EXIT_FAIL
    return EXIT_OK if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
