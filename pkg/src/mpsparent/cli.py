"""Command-line front end: ``mpsparent TASK [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .intersect import DEFAULT_ANGLE_TOL
from .mps import DEFAULT_RANK_TOL
from .scan import (
    SINGLE,
    ScanConfig,
    exit_code,
    read_jsonl,
    run,
    summary_lines,
    table_csv,
)

TASKS = ["table", "suite", "aklt", *SINGLE, "export"]


def parse_size(text: str) -> int:
    """``"4G"``, ``"512M"`` or a plain byte count."""
    units = {"K": 2**10, "M": 2**20, "G": 2**30, "T": 2**40}
    t = text.strip().upper().removesuffix("IB").removesuffix("B")
    if t and t[-1] in units:
        return int(float(t[:-1]) * units[t[-1]])
    return int(t)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mpsparent",
        description="Parent Hamiltonians of matrix product states: intersection scans and checks.",
    )
    p.add_argument("task", choices=TASKS, help="what to run")
    p.add_argument("path", nargs="?", help="JSONL file to read (export only)")
    p.add_argument("--config", help="JSON file with ScanConfig fields; flags override it")
    p.add_argument("--rank-tol", type=float, help=f"relative rank tolerance (default {DEFAULT_RANK_TOL:g})")
    p.add_argument("--angle-tol", type=float, help=f"1 - cos(angle) tolerance (default {DEFAULT_ANGLE_TOL:g})")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--seeds", type=int, help="random instances per table row (default 3)")
    p.add_argument("--mem-budget", type=parse_size, help="memory budget, e.g. 4G (default 4 GiB)")
    p.add_argument("--out", help="JSONL output path (default: stdout)")
    p.add_argument("--resume", action="store_true", help="skip tasks already present in --out")
    p.add_argument("--format", choices=["json", "csv"], help="stdout format (default json)")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--no-timings", action="store_true", help="omit wall times for byte-identical output")
    p.add_argument("--d", type=int, help="physical dimension")
    p.add_argument("--D", type=int, help="bond dimension")
    p.add_argument("--ell", type=int, help="parent term size (default 2)")
    p.add_argument("--L-max", type=int, help="largest block size")
    p.add_argument("--N", type=int, help="chain length for pbc-check / degenerate")
    p.add_argument("--spec", help='model: "aklt" or "j=3/2 J=2 Q=0"')
    p.add_argument("--j-max", help="largest virtual spin for exceptional-scan (default 5)")
    p.add_argument("--suite", help="named check suite")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_FLAG_FIELDS = {
    "rank_tol": "rank_tol", "angle_tol": "angle_tol", "seed": "seed", "seeds": "seeds",
    "mem_budget": "memory_budget", "out": "out", "format": "format", "workers": "workers",
    "d": "d", "D": "D", "ell": "ell", "L_max": "L_max", "N": "N", "spec": "spec",
    "j_max": "j_max", "suite": "suite",
}


def config_from_args(args) -> ScanConfig:
    cfg = ScanConfig.from_json(args.config) if args.config else ScanConfig()
    cfg.task = args.task
    for flag, name in _FLAG_FIELDS.items():
        val = getattr(args, flag)
        if val is not None:
            setattr(cfg, name, val)
    if args.resume:
        cfg.resume = True
    if args.no_timings:
        cfg.timings = False
    if cfg.task == "table" and args.D is not None and args.d is not None:
        cfg.rows = [[args.D, args.d, args.L_max or 4]]
    if cfg.task == "aklt":
        cfg.suite = "aklt"
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.task == "export":
        if not args.path:
            print("export needs a JSONL path", file=sys.stderr)
            return 1
        sys.stdout.write(table_csv(read_jsonl(args.path)))
        return 0
    try:
        cfg = config_from_args(args)
    except (ValueError, TypeError) as exc:
        print(f"bad configuration: {exc}", file=sys.stderr)
        return 1
    if cfg.task == "suite" and not cfg.suite:
        print("suite needs --suite NAME", file=sys.stderr)
        return 1

    sink = sys.stdout if cfg.format == "json" and not cfg.out else None
    try:
        records = run(cfg, sink)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if cfg.format == "csv":
        if cfg.task == "table":
            sys.stdout.write(table_csv(records))
        else:
            print("csv output is only defined for the table task", file=sys.stderr)
    for line in summary_lines(records):
        print(line, file=sys.stderr)
    return exit_code(records)


if __name__ == "__main__":
    sys.exit(main())
