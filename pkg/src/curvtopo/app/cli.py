"""Command line entry point.

    curvtopo run --preset ex2d1 --n 64 --out out/ex2d1
    curvtopo run --config my.cfg
    curvtopo verify --quick
    curvtopo perf-table --out table.csv

Exit codes: 0 success, 2 configuration error, 3 solver failure or budget
exhaustion, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import PRESETS, ConfigError, load_config
from .runner import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK, grid_study, perf_table, refinement_mismatch, run_case

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="curvtopo", description="Curvature-functional topology optimization of a diffusion problem.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="optimize one case")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in example")
    src.add_argument("--config", help="flat key = value config file")
    r.add_argument("--n", type=int, help="cells per axis (overrides the config)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--max-iter", type=int, help="outer iteration budget")
    r.add_argument("--quiet", action="store_true", help="no per-iteration log")

    v = sub.add_parser("verify", help="run the acceptance battery")
    v.add_argument("--quick", action="store_true", help="skip the multi-run studies")

    t = sub.add_parser("perf-table", help="iteration counts over grids and conductivity ratios")
    t.add_argument("--out", help="CSV file to write")
    t.add_argument("--preset", default="perf-table", choices=sorted(PRESETS))
    return p


def _run(args) -> int:
    try:
        cfg = load_config(args.preset or args.config)
        if args.n is not None:
            cfg = cfg.with_overrides(n=args.n)
        if args.max_iter is not None:
            cfg = cfg.with_overrides(max_iter=args.max_iter)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log = None if args.quiet else print
    if cfg.sweep_n and not cfg.sweep_ratio:
        designs = grid_study(cfg, log=print)
        ns = sorted(designs)
        for a, b in zip(ns[:-1], ns[1:]):
            print(f"thresholded mismatch {a} -> {b}: {refinement_mismatch(designs[a], designs[b]):.4f}")
        return EXIT_OK
    if cfg.sweep_ratio:
        perf_table(cfg, None if args.out is None else f"{args.out.rstrip('/')}/perf_table.csv", log=print)
        return EXIT_OK
    result = run_case(cfg, out=args.out, log=log)
    return result.exit_code


def _verify(args) -> int:
    from .acceptance import run_checks

    results = run_checks(quick=args.quick)
    failed = [r.key for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def _perf(args) -> int:
    try:
        cfg = load_config(args.preset)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    perf_table(cfg, args.out, log=print)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return {"run": _run, "verify": _verify, "perf-table": _perf}[args.command](args)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
