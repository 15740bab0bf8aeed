"""L1 time stepping for time-fractional heat and diffusion-wave equations.

Both problems are discretized with P1 elements on the unit square and a
uniform time grid ``t_n = n * T / N``. Each has two solvers that compute the
same discrete solution:

* ``*_standard`` keeps every mass-weighted snapshot ``M u_i`` (``m x N``
  storage);
* ``*_isvd`` streams the snapshots into :class:`~fracstream.isvd.SvdState`
  and evaluates the history convolution in the rank-``k`` coefficient space,
  ``M Q (sum_j w_j c_j)``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import ConfigError, InvalidInputError
from .grid import Grid2D, LoadAssembler, ScalarField, assemble_mass, assemble_stiffness, build_grid
from .linalg import SparseSpdMatrix, SpdFactor
from .isvd import SvdState

Kind = Literal["heat", "wave"]


def _zero(x, y, t):
    return np.zeros_like(x)


def _bubble(x, y, t=0.0):
    return x * y * (1.0 - x) * (1.0 - y)


def example1_forcing(x, y, t):
    return 100.0 * np.sin(2.0 * np.pi * t * (x + y)) * _bubble(x, y)


def _one(x, y, t):
    return np.ones_like(x)


@dataclass
class FracConfig:
    alpha: float
    T: float = 1.0
    N: int = 1000
    n_side: int = 8
    tol: float = 1e-12
    kind: Kind = "heat"
    forcing: ScalarField = _zero
    u0: ScalarField = _zero
    v0: ScalarField = _zero
    svd_method: str = "lapack"
    solve_method: str = "auto"
    max_buffer: int | None = None

    def __post_init__(self):
        if self.kind == "heat":
            if not 0.0 < self.alpha < 1.0:
                raise ConfigError(f"heat problems need 0 < alpha < 1, got {self.alpha}", "alpha")
        elif self.kind == "wave":
            if not 1.0 < self.alpha < 2.0:
                raise ConfigError(f"wave problems need 1 < alpha < 2, got {self.alpha}", "alpha")
        else:
            raise ConfigError(f"unknown problem kind {self.kind!r}", "kind")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N}", "N")
        self.N = int(self.N)
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}", "T")
        if not 0.0 < self.tol < 1.0:
            raise ConfigError(f"tol must lie in (0, 1), got {self.tol}", "tol")
        if int(self.n_side) != self.n_side or self.n_side < 2:
            raise ConfigError(f"n_side must be an integer >= 2, got {self.n_side}", "n_side")

    @property
    def dt(self) -> float:
        return self.T / self.N


def example1(n_side: int = 8, dt: float = 1e-3, tol: float = 1e-12, T: float = 1.0, alpha: float = 0.1) -> FracConfig:
    """Heat problem with an oscillating source and a bubble initial state."""
    return FracConfig(alpha, T, _steps(T, dt), n_side, tol, "heat", example1_forcing, _bubble)


def example2(n_side: int = 8, dt: float = 1e-3, tol: float = 1e-12, T: float = 1.0, alpha: float = 1.5) -> FracConfig:
    """Diffusion-wave problem with unit source, bubble initial state, zero velocity."""
    return FracConfig(alpha, T, _steps(T, dt), n_side, tol, "wave", _one, _bubble, _zero)


def _steps(T: float, dt: float) -> int:
    n = T / dt
    if not dt > 0 or abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError(f"T / dt must be an integer, got {T} / {dt}", "dt")
    return int(round(n))


def l1_weights(alpha: float, n: int) -> np.ndarray:
    """``beta_j = (j+1)^(1-alpha) - j^(1-alpha)`` for ``j = 0..n-1``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"L1 weights need 0 < alpha < 1, got {alpha}")
    return _power_differences(1.0 - alpha, n)


def wave_weights(alpha: float, n: int) -> np.ndarray:
    """``beta_k = (k+1)^(2-alpha) - k^(2-alpha)`` for ``k = 0..n-1``."""
    if not 1.0 < alpha < 2.0:
        raise InvalidInputError(f"wave weights need 1 < alpha < 2, got {alpha}")
    return _power_differences(2.0 - alpha, n)


def _power_differences(exponent: float, n: int) -> np.ndarray:
    if n < 1:
        raise InvalidInputError(f"need at least one weight, got n={n}")
    powers = np.arange(n + 1, dtype=float) ** exponent
    return np.diff(powers)


def wave_history_weights(beta: np.ndarray, n: int) -> np.ndarray:
    """Weights ``w`` over snapshots ``u^{-1}, u^0, ..., u^n`` such that

    ``sum_idx w[idx] u^{idx-1} = 2 u^n - u^{n-1}
    - sum_{k=1}^{n} beta_k (u^{n-k+1} - 2 u^{n-k} + u^{n-k-1})``.

    ``beta`` must hold at least ``n + 1`` entries.
    """
    lag = np.arange(n + 2)  # lag s = n - j for snapshot u^j
    coef = np.zeros(n + 2)
    coef[: n] += beta[1 : n + 1]  # k = s + 1 <= n
    coef[: n + 1] -= 2.0 * beta[: n + 1]  # k = s <= n
    coef[1:] += beta[lag[1:] - 1]  # k = s - 1 >= 0
    return -coef[::-1]


@dataclass
class RunReport:
    solver: str
    kind: Kind
    solution: np.ndarray
    rank: int | None
    history_bytes: int
    wall_seconds: float
    max_residual: float
    l2_discrepancy: float | None = None
    trajectory: list[np.ndarray] | None = field(default=None, repr=False)


@dataclass
class Discretization:
    """Matrices shared by both solvers of one configuration."""

    grid: Grid2D
    mass: SparseSpdMatrix
    stiffness: SparseSpdMatrix
    load: LoadAssembler

    @classmethod
    def build(cls, n_side: int) -> "Discretization":
        grid = build_grid(n_side)
        return cls(grid, assemble_mass(grid), assemble_stiffness(grid), LoadAssembler(grid))

    def project(self, g: ScalarField) -> np.ndarray:
        return SpdFactor(self.mass).solve(self.load(g, 0.0))

    def l2_norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(max(v @ (self.mass @ v), 0.0)))


class FullHistory:
    """Dense store of mass-weighted snapshots ``M u_i``, one per row."""

    def __init__(self, mass: SparseSpdMatrix, capacity: int):
        self.mass = mass
        self._rows = np.empty((capacity, mass.n_rows))
        self.count = 0

    def append(self, u: np.ndarray) -> None:
        self._rows[self.count] = self.mass @ u
        self.count += 1

    def history(self, weights: np.ndarray) -> np.ndarray:
        """``sum_j weights[j] M u_j`` over the stored snapshots."""
        return weights @ self._rows[: self.count]

    @property
    def peak_bytes(self) -> int:
        return self._rows.nbytes

    @property
    def rank(self) -> None:
        return None


class CompressedHistory:
    """Snapshots held as a streaming truncated SVD plus the cached product ``M Q``.

    Leading all-zero snapshots are counted rather than fed to the SVD, which
    needs a nonzero first column; their coefficient columns are zero.
    """

    def __init__(self, mass: SparseSpdMatrix, tol: float, *, svd_method: str = "lapack", max_buffer: int | None = None):
        self.mass = mass
        self.tol = tol
        self.svd_method = svd_method
        self.max_buffer = max_buffer
        self.state: SvdState | None = None
        self.leading_zeros = 0
        self._mq: np.ndarray | None = None
        self._mq_version = -1
        self.mq_refreshes = 0

    @property
    def count(self) -> int:
        return self.leading_zeros + (self.state.n_columns if self.state else 0)

    def append(self, u: np.ndarray) -> None:
        if self.state is not None:
            self.state.update(u)
        elif np.any(u != 0.0):
            self.state = SvdState(u, self.tol, svd_method=self.svd_method, max_buffer=self.max_buffer)
        else:
            self.leading_zeros += 1

    def mq(self) -> np.ndarray:
        # M Q only changes when Q does
        if self._mq_version != self.state.basis_version:
            self._mq = self.mass @ self.state.Q
            self._mq_version = self.state.basis_version
            self.mq_refreshes += 1
        return self._mq

    def history(self, weights: np.ndarray) -> np.ndarray:
        if self.state is None:
            return np.zeros(self.mass.n_rows)
        coeff = self.state.combine(weights[self.leading_zeros :])
        return self.mq() @ coeff

    def finalize(self) -> None:
        if self.state is not None:
            self.state.flush()

    @property
    def peak_bytes(self) -> int:
        return self.state.peak_bytes if self.state else 0

    @property
    def rank(self) -> int:
        return self.state.rank if self.state else 0


def _make_store(config: FracConfig, disc: Discretization, compressed: bool, capacity: int):
    if compressed:
        return CompressedHistory(disc.mass, config.tol, svd_method=config.svd_method, max_buffer=config.max_buffer)
    return FullHistory(disc.mass, capacity)


def _check_kind(config: FracConfig, kind: Kind) -> None:
    if config.kind != kind:
        raise ConfigError(f"solver expects a {kind} problem, got kind={config.kind!r}", "kind")


def _run_heat(config: FracConfig, disc: Discretization | None, compressed: bool, record: bool) -> RunReport:
    _check_kind(config, "heat")
    disc = disc or Discretization.build(config.n_side)
    alpha, dt, n_steps = config.alpha, config.dt, config.N
    scale = math.gamma(2.0 - alpha) * dt**alpha
    factor = SpdFactor(disc.mass + disc.stiffness.scaled(scale), config.solve_method)
    u0 = disc.project(config.u0)
    mu0 = disc.mass @ u0
    beta = l1_weights(alpha, n_steps + 1)
    # lag j contributes (beta_{j-1} - beta_j) M u_{i-j}
    lag_weights = beta[:-1] - beta[1:]
    store = _make_store(config, disc, compressed, n_steps)
    trajectory = [] if record else None

    max_res = 0.0
    u = u0
    start = time.perf_counter()
    for i in range(1, n_steps + 1):
        rhs = beta[i - 1] * mu0 + scale * disc.load(config.forcing, i * dt)
        if i > 1:
            rhs += store.history(lag_weights[: i - 1][::-1])
        u = factor.solve(rhs)
        max_res = max(max_res, factor.residual(u, rhs) / max(1.0, float(np.linalg.norm(rhs))))
        store.append(u)
        if record:
            trajectory.append(u.copy())
    if compressed:
        store.finalize()
    wall = time.perf_counter() - start

    return RunReport(
        solver="isvd" if compressed else "standard",
        kind="heat",
        solution=u,
        rank=store.rank,
        history_bytes=store.peak_bytes,
        wall_seconds=wall,
        max_residual=max_res,
        trajectory=trajectory,
    )


def _run_wave(config: FracConfig, disc: Discretization | None, compressed: bool, record: bool) -> RunReport:
    _check_kind(config, "wave")
    disc = disc or Discretization.build(config.n_side)
    alpha, dt, n_steps = config.alpha, config.dt, config.N
    scale = math.gamma(3.0 - alpha) * dt**alpha
    factor = SpdFactor(disc.mass + disc.stiffness.scaled(scale), config.solve_method)
    u_now = disc.project(config.u0)
    u_prev = u_now - dt * disc.project(config.v0)
    beta = wave_weights(alpha, n_steps + 1)
    store = _make_store(config, disc, compressed, n_steps + 2)
    store.append(u_prev)
    store.append(u_now)
    trajectory = [] if record else None

    max_res = 0.0
    u = u_now
    start = time.perf_counter()
    for n in range(n_steps):
        rhs = scale * disc.load(config.forcing, (n + 1) * dt)
        rhs += store.history(wave_history_weights(beta, n))
        u = factor.solve(rhs)
        max_res = max(max_res, factor.residual(u, rhs) / max(1.0, float(np.linalg.norm(rhs))))
        store.append(u)
        if record:
            trajectory.append(u.copy())
    if compressed:
        store.finalize()
    wall = time.perf_counter() - start

    return RunReport(
        solver="isvd" if compressed else "standard",
        kind="wave",
        solution=u,
        rank=store.rank,
        history_bytes=store.peak_bytes,
        wall_seconds=wall,
        max_residual=max_res,
        trajectory=trajectory,
    )


def solve_heat_standard(config: FracConfig, disc: Discretization | None = None, *, record: bool = False) -> RunReport:
    return _run_heat(config, disc, False, record)


def solve_heat_isvd(config: FracConfig, disc: Discretization | None = None, *, record: bool = False) -> RunReport:
    return _run_heat(config, disc, True, record)


def solve_wave_standard(config: FracConfig, disc: Discretization | None = None, *, record: bool = False) -> RunReport:
    return _run_wave(config, disc, False, record)


def solve_wave_isvd(config: FracConfig, disc: Discretization | None = None, *, record: bool = False) -> RunReport:
    return _run_wave(config, disc, True, record)


SOLVERS: dict[tuple[str, str], Callable[..., RunReport]] = {
    ("heat", "standard"): solve_heat_standard,
    ("heat", "isvd"): solve_heat_isvd,
    ("wave", "standard"): solve_wave_standard,
    ("wave", "isvd"): solve_wave_isvd,
}


def solve(config: FracConfig, solver: str, disc: Discretization | None = None, **kwargs) -> RunReport:
    try:
        fn = SOLVERS[(config.kind, solver)]
    except KeyError:
        raise ConfigError(f"unknown solver {solver!r}", "solver") from None
    return fn(config, disc, **kwargs)


def l2_discrepancy(disc: Discretization, a: np.ndarray, b: np.ndarray) -> float:
    """Mass-weighted norm ``sqrt((a-b)^T M (a-b))``."""
    return disc.l2_norm(np.asarray(a) - np.asarray(b))
