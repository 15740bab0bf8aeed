"""Benchmark runs: configuration parsing, paired solver runs and CSV output.

Config files are ``key = value`` lines; ``#`` starts a comment and several
pairs may share a line when separated by commas. Recognised keys::

    problem   example1 | example2 | heat | wave       (default example1)
    alpha     fractional order                        (0.1 heat, 1.5 wave)
    T         final time                              (1.0)
    dt        time step, T/dt must be an integer      (1e-3)
    grids     n_side values, e.g. "8 16 32"           (8)
    tol       ISVD tolerance                          (1e-12)
    solvers   standard | isvd | both                  (both)
    output    CSV path                                (none: stdout)
    seed      integer, reserved                       (0)
    forcing, u0, v0   default | zero                  (default)
    timing    true | false; false leaves wall_seconds empty  (true)
    parallel  true | false; run grids on a thread pool       (false)
"""
from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .fracpde import (
    Discretization,
    FracConfig,
    RunReport,
    _zero,
    example1,
    example2,
    l2_discrepancy,
    solve,
)

CSV_HEADER = (
    "problem",
    "alpha",
    "n_side",
    "h",
    "dt",
    "tol",
    "solver",
    "wall_seconds",
    "history_bytes",
    "rank_k",
    "l2_discrepancy",
)

_PROBLEMS = {"example1": "heat", "example2": "wave", "heat": "heat", "wave": "wave"}
_DEFAULT_ALPHA = {"heat": 0.1, "wave": 1.5}


@dataclass(frozen=True)
class BenchSpec:
    problem: str = "heat"
    alpha: float = 0.1
    dt: float = 1e-3
    T: float = 1.0
    grids: tuple[int, ...] = (8,)
    tol: float = 1e-12
    solvers: str = "both"
    output: str | None = None
    seed: int = 0
    forcing: str = "default"
    u0: str = "default"
    v0: str = "default"
    timing: bool = True
    parallel: bool = False

    @property
    def n_steps(self) -> int:
        return round(self.T / self.dt)

    @property
    def solver_names(self) -> tuple[str, ...]:
        return ("standard", "isvd") if self.solvers == "both" else (self.solvers,)

    def frac_config(self, n_side: int) -> FracConfig:
        make = example1 if self.problem == "heat" else example2
        cfg = make(n_side, self.dt, self.tol, self.T, self.alpha)
        overrides = {name: _zero for name in ("forcing", "u0", "v0") if getattr(self, name) == "zero"}
        return replace(cfg, **overrides)


@dataclass
class CsvRow:
    problem: str
    alpha: float
    n_side: int
    h: float
    dt: float
    tol: float
    solver: str
    wall_seconds: float | None = None
    history_bytes: int | None = None
    rank_k: int | None = None
    l2_discrepancy: float | None = None
    error: str | None = field(default=None, repr=False)

    def fields(self, timing: bool = True) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            return repr(float(v)) if isinstance(v, float) else str(v)

        out = [fmt(getattr(self, name)) for name in CSV_HEADER]
        if not timing:
            out[CSV_HEADER.index("wall_seconds")] = ""
        if self.error is not None:
            out[CSV_HEADER.index("l2_discrepancy")] = f"ERROR: {self.error}"
        return out


def _split_pairs(text: str) -> list[tuple[int, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for chunk in re.split(r",\s*(?=[A-Za-z_]\w*\s*=)", line):
            pairs.append((lineno, chunk.strip()))
    return pairs


def _parse_bool(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {value!r}", key)


def _parse_float(key: str, value: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}", key) from None
    if not math.isfinite(out):
        raise ConfigError(f"{key}: must be finite, got {value!r}", key)
    return out


def _parse_grids(key: str, value: str) -> tuple[int, ...]:
    items = [s for s in re.split(r"[\s,]+", value) if s]
    if not items:
        raise ConfigError(f"{key}: grid list is empty", key)
    grids = []
    for s in items:
        try:
            n = int(s)
        except ValueError:
            raise ConfigError(f"{key}: expected integers, got {s!r}", key) from None
        if n < 2:
            raise ConfigError(f"{key}: n_side must be >= 2, got {n}", key)
        grids.append(n)
    return tuple(grids)


def parse_config(text: str) -> BenchSpec:
    """Parse and validate a ``key = value`` benchmark description."""
    raw: dict[str, str] = {}
    aliases = {"n_side": "grids", "grid": "grids", "solver": "solvers", "out": "output"}
    known = {"problem", "alpha", "T", "dt", "grids", "tol", "solvers", "output", "seed",
             "forcing", "u0", "v0", "timing", "parallel"}
    for lineno, pair in _split_pairs(text):
        if "=" not in pair:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {pair!r}")
        key, value = (s.strip() for s in pair.split("=", 1))
        key = aliases.get(key, key)
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key)
        raw[key] = value

    problem = None
    if "problem" in raw:
        name = raw["problem"].lower()
        if name not in _PROBLEMS:
            raise ConfigError(f"problem: expected one of {sorted(_PROBLEMS)}, got {raw['problem']!r}", "problem")
        problem = _PROBLEMS[name]

    if "alpha" in raw:
        alpha = _parse_float("alpha", raw["alpha"])
        regime = "heat" if 0.0 < alpha < 1.0 else "wave" if 1.0 < alpha < 2.0 else None
        if regime is None:
            raise ConfigError(f"alpha: must lie in (0, 1) for heat or (1, 2) for wave, got {alpha}", "alpha")
        if problem is not None and regime != problem:
            raise ConfigError(f"alpha: {alpha} is not valid for a {problem} problem", "alpha")
        problem = regime
    else:
        problem = problem or "heat"
        alpha = _DEFAULT_ALPHA[problem]

    T = _parse_float("T", raw["T"]) if "T" in raw else 1.0
    if T <= 0:
        raise ConfigError(f"T: must be positive, got {T}", "T")
    dt = _parse_float("dt", raw["dt"]) if "dt" in raw else 1e-3
    if dt <= 0:
        raise ConfigError(f"dt: must be positive, got {dt}", "dt")
    n = T / dt
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError(f"dt: T / dt = {n!r} is not an integer", "dt")

    tol = _parse_float("tol", raw["tol"]) if "tol" in raw else 1e-12
    if not 0.0 < tol < 1.0:
        raise ConfigError(f"tol: must lie in (0, 1), got {tol}", "tol")

    solvers = raw.get("solvers", "both").lower()
    if solvers not in ("standard", "isvd", "both"):
        raise ConfigError(f"solvers: expected standard, isvd or both, got {solvers!r}", "solvers")

    overrides = {}
    for key in ("forcing", "u0", "v0"):
        value = raw.get(key, "default").lower()
        if value not in ("default", "zero"):
            raise ConfigError(f"{key}: expected 'default' or 'zero', got {value!r}", key)
        overrides[key] = value

    seed = 0
    if "seed" in raw:
        try:
            seed = int(raw["seed"])
        except ValueError:
            raise ConfigError(f"seed: expected an integer, got {raw['seed']!r}", "seed") from None

    return BenchSpec(
        problem=problem,
        alpha=alpha,
        dt=dt,
        T=T,
        grids=_parse_grids("grids", raw["grids"]) if "grids" in raw else (8,),
        tol=tol,
        solvers=solvers,
        output=raw.get("output") or None,
        seed=seed,
        timing=_parse_bool("timing", raw["timing"]) if "timing" in raw else True,
        parallel=_parse_bool("parallel", raw["parallel"]) if "parallel" in raw else False,
        **overrides,
    )


def report_memory(report: RunReport) -> int:
    """Peak history bytes recorded by the run's history store.

    Full history: ``8 * m * n_snapshots`` (N for heat, N + 2 for wave).
    Compressed: the peak over the run of ``8 * (m*k + k*l + k*k + k*q)``
    for basis, coefficients, rotation and queued columns; 0 if every
    snapshot was zero.
    """
    return int(report.history_bytes)


def _run_grid(spec: BenchSpec, n_side: int) -> list[CsvRow]:
    cfg = spec.frac_config(n_side)
    base = dict(problem="example1" if spec.problem == "heat" else "example2", alpha=spec.alpha,
                n_side=n_side, h=1.0 / n_side, dt=spec.dt, tol=spec.tol)
    disc = Discretization.build(n_side)
    rows, reports = [], {}
    for name in spec.solver_names:
        row = CsvRow(solver=name, **base)
        try:
            rep = solve(cfg, name, disc)
        except Exception as exc:  # keep going with the remaining runs
            row.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        else:
            reports[name] = rep
            row.wall_seconds = rep.wall_seconds
            row.history_bytes = report_memory(rep)
            row.rank_k = rep.rank
        rows.append(row)
    if len(reports) == 2:
        gap = l2_discrepancy(disc, reports["standard"].solution, reports["isvd"].solution)
        for row in rows:
            row.l2_discrepancy = gap
    return rows


def run_bench(spec: BenchSpec) -> list[CsvRow]:
    """One row per (grid, solver); paired runs share a discrepancy value."""
    if spec.parallel and len(spec.grids) > 1:
        with ThreadPoolExecutor(max_workers=len(spec.grids)) as pool:
            chunks = list(pool.map(lambda n: _run_grid(spec, n), spec.grids))
    else:
        chunks = [_run_grid(spec, n) for n in spec.grids]
    return [row for chunk in chunks for row in chunk]


def write_csv(rows: list[CsvRow], stream, timing: bool = True) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.fields(timing))


def rows_to_csv(rows: list[CsvRow], timing: bool = True) -> str:
    buf = io.StringIO()
    write_csv(rows, buf, timing)
    return buf.getvalue()
