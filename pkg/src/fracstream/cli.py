"""``fracstream`` command line.

Exit codes: 0 success, 1 configuration error, 2 solver failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .bench import BenchSpec, parse_config, rows_to_csv, run_bench
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracstream", description="Time-fractional PDE solvers with compressed history.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    bench = sub.add_parser("bench", help="run the experiments described in a config file")
    bench.add_argument("--config", required=True, help="key = value config file")
    bench.add_argument("--out", help="CSV output path (overrides the config's output)")
    bench.add_argument("--no-timing", action="store_true", help="leave wall_seconds empty for reproducible CSV")
    bench.add_argument("--parallel", action="store_true", help="run grid sizes on a thread pool")

    solve = sub.add_parser("solve", help="run one problem on one grid")
    solve.add_argument("--problem", choices=("example1", "example2"), default="example1")
    solve.add_argument("--n-side", type=int, default=8)
    solve.add_argument("--dt", type=float, default=1e-3)
    solve.add_argument("--T", type=float, default=1.0)
    solve.add_argument("--alpha", type=float)
    solve.add_argument("--tol", type=float, default=1e-12)
    solve.add_argument("--solver", choices=("standard", "isvd", "both"), default="both")
    solve.add_argument("--out", help="CSV output path (default: stdout)")
    solve.add_argument("--no-timing", action="store_true")
    return parser


def _spec_from_solve_args(args) -> BenchSpec:
    lines = [
        f"problem = {args.problem}",
        f"grids = {args.n_side}",
        f"dt = {args.dt!r}",
        f"T = {args.T!r}",
        f"tol = {args.tol!r}",
        f"solvers = {args.solver}",
    ]
    if args.alpha is not None:
        lines.append(f"alpha = {args.alpha!r}")
    return parse_config("\n".join(lines))


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "bench":
            with open(args.config) as fh:
                spec = parse_config(fh.read())
            if args.parallel:
                spec = replace(spec, parallel=True)
            if args.no_timing:
                spec = replace(spec, timing=False)
            out = args.out or spec.output
        else:
            spec = _spec_from_solve_args(args)
            if args.no_timing:
                spec = replace(spec, timing=False)
            out = args.out
    except (ConfigError, OSError) as exc:
        print(f"fracstream: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    rows = run_bench(spec)
    text = rows_to_csv(rows, spec.timing)
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    failed = [r for r in rows if r.error is not None]
    for r in failed:
        print(f"fracstream: n_side={r.n_side} solver={r.solver} failed: {r.error}", file=sys.stderr)
    return EXIT_SOLVER if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
