"""Streaming truncated SVD of a column stream.

Columns whose residual against the current left basis is below ``tol`` are
not absorbed right away: their coefficient vectors ``d = Q.T u`` are queued
and folded in with one economy SVD when the next high-residual column
arrives (or at :func:`finalize`). A high-residual column grows the basis by
one through the SVD of the bordered matrix ``[[diag(sigma), d], [0, p]]``,
after which only the trailing singular value can be dropped.
"""
from __future__ import annotations

import os
from typing import Callable, Iterable, Iterator

import numpy as np

from .errors import DimensionError, InvalidInputError, ZeroColumnError
from .linalg import SvdTriple, dense_svd_econ, dense_svd_full

# observer(sigma_before, mu, p) is called after every bordered update
UpdateObserver = Callable[[np.ndarray, np.ndarray, float], None]


class SvdState:
    """Mutable streaming SVD ``[u_1 ... u_l] ~ Q diag(sigma) R.T``.

    ``R`` only has rows for absorbed columns; the ``q`` pending columns live
    in ``V`` as coefficient vectors with respect to ``Q``.
    """

    def __init__(
        self,
        u1,
        tol: float = 1e-12,
        *,
        max_buffer: int | None = None,
        svd_method: str = "lapack",
        observer: UpdateObserver | None = None,
    ):
        if not 0.0 < tol < 1.0:
            raise InvalidInputError(f"tol must lie in (0, 1), got {tol}")
        u1 = np.asarray(u1, dtype=float).ravel()
        if not np.all(np.isfinite(u1)):
            raise InvalidInputError("column contains non-finite entries")
        norm = float(np.sqrt(u1 @ u1))
        if norm == 0.0:
            raise ZeroColumnError("the first column of the stream must be nonzero")
        self.tol = float(tol)
        self.max_buffer = max_buffer
        self.svd_method = svd_method
        self.observer = observer
        self.Q = (u1 / norm)[:, None]
        self.sigma = np.array([norm])
        self.R = np.ones((1, 1))
        self.V: list[np.ndarray] = []
        self.Q0 = np.eye(1)
        self.n_columns = 1
        # bumped whenever Q changes, so callers can cache products with Q
        self.basis_version = 0
        self.peak_bytes = 0
        self._track_memory()

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    @property
    def q(self) -> int:
        return len(self.V)

    @property
    def n_absorbed(self) -> int:
        return self.R.shape[0]

    def history_bytes(self) -> int:
        k = self.rank
        return 8 * (self.m * k + k * self.n_columns + k * k + k * self.q)

    def _track_memory(self) -> None:
        self.peak_bytes = max(self.peak_bytes, self.history_bytes())

    def _buffer_cap(self) -> int:
        if self.max_buffer is not None:
            return self.max_buffer
        return max(2 * self.rank, 64)

    def _absorb_buffer(self) -> np.ndarray:
        """Fold the queued columns into sigma and R; return the k x k rotation of Q."""
        k = self.rank
        y = np.hstack([np.diag(self.sigma), np.column_stack(self.V)])
        svd = dense_svd_econ(y, self.svd_method)
        self.sigma = svd.sigma
        self.R = np.vstack([self.R @ svd.r_factor[:k], svd.r_factor[k:]])
        self.V = []
        return svd.q_factor

    def flush(self) -> None:
        """Absorb pending columns so that ``R`` has a row for every column."""
        if self.V:
            qy = self._absorb_buffer()
            self.Q = self.Q @ qy
            self.basis_version += 1
            self._track_memory()

    def update(self, u) -> "SvdState":
        u = np.asarray(u, dtype=float).ravel()
        if u.shape[0] != self.m:
            raise DimensionError(f"column of length {self.m} expected, got {u.shape[0]}")
        if not np.all(np.isfinite(u)):
            raise InvalidInputError("column contains non-finite entries")
        self.n_columns += 1
        d = self.Q.T @ u
        e = u - self.Q @ d
        p = float(np.sqrt(e @ e))

        if p >= self.tol:
            e /= p
            # second Gram-Schmidt pass, always: a trigger on |Q.T e| > tol lets
            # orthogonality drift up to tol. Keeps u = Q d + p e exact.
            c = self.Q.T @ e
            e -= self.Q @ c
            p1 = float(np.sqrt(e @ e))
            d += p * c
            p *= p1
            if p1 > 0.0:
                e /= p1

        if p < self.tol:
            self.V.append(d)
            self._track_memory()
            if len(self.V) >= self._buffer_cap():
                self.flush()
            return self

        k = self.rank
        if self.V:
            # the rotation is deferred and merged with the bordered one below
            qy = self._absorb_buffer()
            self.Q0 = self.Q0 @ qy
            d = qy.T @ d

        y = np.zeros((k + 1, k + 1))
        y[np.arange(k), np.arange(k)] = self.sigma
        y[:k, k] = d
        y[k, k] = p
        svd = dense_svd_full(y, self.svd_method)
        if self.observer is not None:
            self.observer(self.sigma.copy(), svd.sigma.copy(), p)

        q0 = np.zeros((k + 1, k + 1))
        q0[:k, :k] = self.Q0
        q0[k, k] = 1.0
        q0 = q0 @ svd.q_factor

        mu = svd.sigma
        keep = k + 1 if mu[k] >= self.tol * mu.sum() else k
        basis = np.hstack([self.Q, e[:, None]])
        self.Q = basis @ q0[:, :keep]
        self.sigma = mu[:keep].copy()
        ry = svd.r_factor[:, :keep]
        self.R = np.vstack([self.R @ ry[:k], ry[k:]])
        self.Q0 = np.eye(keep)
        self.basis_version += 1
        self._track_memory()
        return self

    def to_triple(self) -> SvdTriple:
        return SvdTriple(self.Q.copy(), self.sigma.copy(), self.R.copy())

    def coefficients(self) -> np.ndarray:
        """k x l matrix whose column j satisfies ``u_j ~ Q @ c_j``."""
        c = self.sigma[:, None] * self.R.T
        if self.V:
            c = np.hstack([c, np.column_stack(self.V)])
        return c

    def combine(self, weights) -> np.ndarray:
        """``sum_j weights[j] * c_j`` without forming the coefficient matrix."""
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.n_columns,):
            raise DimensionError(f"{self.n_columns} weights expected, got shape {w.shape}")
        la = self.n_absorbed
        out = self.sigma * (w[:la] @ self.R)
        if self.V:
            out += np.column_stack(self.V) @ w[la:]
        return out

    def reconstruct_column(self, j: int) -> np.ndarray:
        """Column ``j`` (1-based) of the approximated snapshot matrix."""
        if not 1 <= j <= self.n_columns:
            raise IndexError(f"column index {j} outside 1..{self.n_columns}")
        if j <= self.n_absorbed:
            return self.Q @ (self.sigma * self.R[j - 1])
        return self.Q @ self.V[j - 1 - self.n_absorbed]


def initialize(u1, tol: float = 1e-12, **kwargs) -> SvdState:
    return SvdState(u1, tol, **kwargs)


def update(state: SvdState, u) -> SvdState:
    return state.update(u)


def finalize(state: SvdState) -> SvdTriple:
    state.flush()
    return state.to_triple()


def reconstruct_column(state: SvdState, j: int) -> np.ndarray:
    return state.reconstruct_column(j)


def build_full(columns: Iterable, tol: float = 1e-12, **kwargs) -> SvdTriple:
    """Initialize with the first column, stream in the rest, finalize."""
    it = iter(columns)
    try:
        first = next(it)
    except StopIteration:
        raise InvalidInputError("column stream is empty") from None
    state = SvdState(first, tol, **kwargs)
    for u in it:
        state.update(u)
    return finalize(state)


def iter_text_columns(path: str | os.PathLike) -> Iterator[np.ndarray]:
    """Stream columns from a text file: header ``m n`` then one column per line."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise InvalidInputError("header must read 'm n'")
        m, n = int(header[0]), int(header[1])
        count = 0
        for line in fh:
            if not line.strip():
                continue
            col = np.array(line.split(), dtype=float)
            if col.shape[0] != m:
                raise DimensionError(f"line {count + 2}: expected {m} values, got {col.shape[0]}")
            count += 1
            yield col
        if count != n:
            raise DimensionError(f"header announces {n} columns, file holds {count}")


def write_factors(triple: SvdTriple, directory: str | os.PathLike) -> None:
    """Write ``Q.txt``, ``sigma.txt`` and ``R.txt`` into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    np.savetxt(os.path.join(directory, "Q.txt"), triple.q_factor, fmt="%.17g")
    np.savetxt(os.path.join(directory, "sigma.txt"), triple.sigma, fmt="%.17g")
    np.savetxt(os.path.join(directory, "R.txt"), triple.r_factor, fmt="%.17g")
