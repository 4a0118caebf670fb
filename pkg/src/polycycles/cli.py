"""Command line front end.

Four subcommands: `analyze` runs the closed-form pipeline to a verdict,
`oracle` integrates the flow and fits expansions numerically, `scan`
tabulates closed-form quantities over a parameter grid as CSV, and
`compose-check` cross-validates the composition calculus against the
pointwise oracle.  Exit codes are a stable contract: 0 success, 2 usage
error, 3 model error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .composecheck import run_compose_check
from .errors import ModelError, NumericError, PolycycleError
from .model import load_model
from .pipeline import (DEFAULTS, analyze, default_fit_grid, oracle_cycles,
                       oracle_dulac, oracle_return, scan)
from .resultdoc import dumps, render_csv

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MODEL = 3
EXIT_NUMERIC = 4

MAX_GRID_POINTS = 10**6


class UsageError(Exception):
    """Bad command line input, distinct from a bad model file."""


def _pairs(items: Sequence[str] | None, flag: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"{flag} expects NAME=VALUE, got {item!r}")
        out[name.strip()] = value.strip()
    return out


def _tols(items: Sequence[str] | None) -> dict[str, float]:
    out = {}
    for name, value in _pairs(items, "--tol").items():
        if name not in DEFAULTS:
            raise UsageError(f"unknown tolerance {name!r} "
                             f"(known: {', '.join(sorted(DEFAULTS))})")
        try:
            out[name] = float(value)
        except ValueError as exc:
            raise UsageError(f"--tol {name}: {value!r} is not a number") from exc
    return out


def _overrides(mf, items: Sequence[str] | None) -> dict[str, str]:
    sets = _pairs(items, "--set")
    declared = set(mf.param_names)
    for name in sets:
        if name not in declared:
            raise UsageError(f"--set {name}: not a declared parameter "
                             f"(declared: {', '.join(mf.param_names) or 'none'})")
    return sets


def _s_range(text: str | None) -> tuple[float, float] | None:
    if text is None:
        return None
    lo_s, sep, hi_s = text.partition(":")
    try:
        lo, hi = float(lo_s), float(hi_s)
    except ValueError as exc:
        raise UsageError(f"--s-range expects LO:HI, got {text!r}") from exc
    if not sep or not (0.0 < lo < hi):
        raise UsageError(f"--s-range {text!r} is empty; need 0 < LO < HI")
    return lo, hi


def _grid(items: Sequence[str] | None, mf) -> dict[str, tuple[float, float, int]]:
    if not items:
        raise UsageError("scan requires at least one --grid name=start:stop:count")
    declared = set(mf.param_names)
    out: dict[str, tuple[float, float, int]] = {}
    total = 1
    for item in items:
        name, sep, rest = item.partition("=")
        parts = rest.split(":")
        if not sep or len(parts) != 3:
            raise UsageError(f"--grid expects name=start:stop:count, got {item!r}")
        name = name.strip()
        if name not in declared:
            raise UsageError(f"--grid {name}: not a declared parameter")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise UsageError(f"--grid {item!r}: unreadable axis") from exc
        if count < 1:
            raise UsageError(f"--grid {name}: count must be >= 1")
        out[name] = (start, stop, count)
        total *= count
    if total > MAX_GRID_POINTS:
        raise UsageError(f"grid has {total} points; the limit is {MAX_GRID_POINTS}")
    return out


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polycycles",
        description="Polycycle return-map expansions and cyclicity verdicts.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, model: bool) -> None:
        if model:
            p.add_argument("--model", required=True, help="model file path")
            p.add_argument("--set", action="append", metavar="NAME=VALUE",
                           help="override a parameter (repeatable)")
        p.add_argument("--out", help="write the result document here instead of stdout")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                       help="override a numeric tolerance (repeatable)")

    p = sub.add_parser("analyze", help="closed-form pipeline: expansions and verdict")
    common(p, model=True)

    p = sub.add_parser("oracle", help="numeric integration cross-checks")
    common(p, model=True)
    p.add_argument("--what", required=True, choices=("dulac", "return", "cycles"))
    p.add_argument("--corner", type=int, help="1-based corner index (dulac only)")
    p.add_argument("--s-range", dest="s_range", metavar="LO:HI",
                   help="section-parameter range; default is the standard fit grid")

    p = sub.add_parser("compose-check",
                       help="cross-validate composition rules against the "
                            "pointwise oracle")
    common(p, model=False)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--count", type=int, default=100,
                   help="random cases per sign case")
    p.add_argument("--bias", type=float, default=0.0,
                   help="test hook: perturb the closed forms to confirm the "
                        "check flags disagreement")

    p = sub.add_parser("scan", help="closed-form quantities over a parameter grid")
    common(p, model=True)
    p.add_argument("--grid", action="append", metavar="NAME=START:STOP:COUNT",
                   help="grid axis (repeatable)")
    return parser


def _cmd_analyze(args) -> int:
    mf = load_model(args.model)
    doc = analyze(mf, _overrides(mf, args.set), _tols(args.tol))
    _emit(dumps(doc), args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    mf = load_model(args.model)
    overrides = _overrides(mf, args.set)
    tols = _tols(args.tol)
    rng = _s_range(args.s_range)
    if args.what == "dulac":
        if args.corner is None:
            raise UsageError("oracle --what dulac requires --corner")
        svals = None
        if rng is not None:
            points = int(dict(mf.options).get("fit_points", DEFAULTS["fit_points"]))
            svals = np.geomspace(rng[1], rng[0], points)
        doc = oracle_dulac(mf, args.corner, svals, overrides, tols)
    elif args.what == "return":
        svals = None
        if rng is not None:
            points = int(dict(mf.options).get("fit_points", DEFAULTS["fit_points"]))
            svals = np.geomspace(rng[1], rng[0], points)
        doc = oracle_return(mf, svals, overrides, tols)
    else:
        doc = oracle_cycles(mf, rng or (1e-6, 1e-1), overrides, tols)
    _emit(dumps(doc), args.out)
    return EXIT_OK


def _cmd_compose_check(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    report = run_compose_check(args.seed, args.count, bias=args.bias)
    doc = {
        "command": "compose-check",
        "seed": report.seed,
        "count": report.count,
        "bias": report.bias,
        "cases": [
            {"case": c.case, "trials": c.trials,
             "max_leading_dev": c.max_leading_dev,
             "max_second_dev": c.max_second_dev,
             "max_offset_dev": c.max_offset_dev}
            for c in report.cases
        ],
        "worst_leading": report.worst_leading,
        "worst_second": report.worst_second,
        "passed": report.passed(),
    }
    _emit(dumps(doc), args.out)
    return EXIT_OK


def _cmd_scan(args) -> int:
    mf = load_model(args.model)
    overrides = _overrides(mf, args.set)
    header, rows = scan(mf, _grid(args.grid, mf), overrides,
                        max_points=MAX_GRID_POINTS)
    _emit(render_csv(header, rows), args.out)
    return EXIT_OK


_COMMANDS = {
    "analyze": _cmd_analyze,
    "oracle": _cmd_oracle,
    "compose-check": _cmd_compose_check,
    "scan": _cmd_scan,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PolycycleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
