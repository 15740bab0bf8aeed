"""Small dense SVDs and sparse SPD storage/solves.

Dense matrices are plain ``numpy.ndarray`` objects of dtype float64 in
row-major (C) order. Sparse symmetric matrices are held by
:class:`SparseSpdMatrix`, a thin wrapper over a CSR array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionError, FactorizationError, InvalidInputError

SVD_METHODS = ("lapack", "jacobi")


@dataclass(frozen=True)
class SvdTriple:
    """``Y = q_factor @ diag(sigma) @ r_factor.T``."""

    q_factor: np.ndarray
    sigma: np.ndarray
    r_factor: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    def reconstruct(self) -> np.ndarray:
        k = self.sigma.shape[0]
        return (self.q_factor[:, :k] * self.sigma) @ self.r_factor[:, :k].T


def _as_finite_matrix(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] == 0 or y.shape[1] == 0:
        raise InvalidInputError(f"expected a non-empty 2-D matrix, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("matrix contains non-finite entries")
    return y


def _complete_basis(basis: np.ndarray, dim: int) -> np.ndarray:
    """Extend orthonormal columns ``basis`` (dim x r) to a dim x dim orthogonal matrix."""
    r = basis.shape[1]
    if r == dim:
        return basis
    q, _ = np.linalg.qr(np.hstack([basis, np.eye(dim)]))
    # the first r columns of q span basis; keep basis itself for those
    return np.hstack([basis, q[:, r:dim]])


def jacobi_svd(a, *, max_sweeps: int = 80) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD by one-sided (Hestenes) Jacobi rotations.

    Returns ``(u, s, v)`` with ``a = u @ diag(s) @ v.T``, ``s`` sorted
    nonincreasing and ``u``, ``v`` having ``min(a.shape)`` orthonormal
    columns. Columns of ``u`` belonging to zero singular values are filled
    in with an orthonormal completion.
    """
    a = _as_finite_matrix(a)
    if a.shape[0] < a.shape[1]:
        v, s, u = jacobi_svd(a.T, max_sweeps=max_sweeps)
        return u, s, v

    m, n = a.shape
    # unit max-abs scaling keeps the inner products clear of under/overflow
    scale = float(np.abs(a).max()) or 1.0
    # work on columns stored contiguously
    w = np.array(a.T / scale, order="C")
    v = np.eye(n)
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp, wq = w[p], w[q]
                alpha = wp @ wp
                beta = wq @ wq
                gamma = wp @ wq
                if gamma == 0.0 or abs(gamma) <= eps * np.sqrt(alpha * beta):
                    continue
                rotated = True
                diff = beta - alpha
                if abs(diff) > 1e150 * abs(gamma):
                    # zeta would overflow; tan of the angle is 1 / (2 zeta)
                    t = gamma / diff
                else:
                    zeta = diff / (2.0 * gamma)
                    t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                w[p], w[q] = c * wp - s * wq, s * wp + c * wq
                vp, vq = v[p].copy(), v[q].copy()
                v[p], v[q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break

    # scaled norms: squares of entries below ~1e-162 underflow
    peak = np.abs(w).max(axis=1)
    safe = np.where(peak > 0, peak, 1.0)
    sig = peak * np.sqrt(np.einsum("ij,ij->i", w / safe[:, None], w / safe[:, None]))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    w = w[order]
    v = v[order].T

    cutoff = sig[0] * max(m, n) * eps if sig[0] > 0 else 0.0
    good = sig > cutoff
    r = int(np.count_nonzero(good))
    u = np.zeros((m, n))
    u[:, :r] = w[:r].T / sig[:r]
    if r < n:
        # numerically null directions: sigma is noise, basis is arbitrary
        u[:, :n] = _complete_basis(u[:, :r], m)[:, :n]
    return u, sig * scale, v


def _lapack_svd(y: np.ndarray, full: bool):
    u, s, vt = np.linalg.svd(y, full_matrices=full)
    return u, s, vt.T


def _fix_signs(u: np.ndarray, v: np.ndarray, p: int) -> None:
    """Make the largest-magnitude entry of each left singular vector positive."""
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    flip_v = np.zeros(v.shape[1], dtype=bool)
    flip_v[:p] = flip[:p]
    v[:, flip_v] *= -1.0


def dense_svd_econ(y, method: str = "lapack") -> SvdTriple:
    """Economy SVD: ``min(m, n)`` singular values and vectors."""
    y = _as_finite_matrix(y)
    p = min(y.shape)
    if method == "lapack":
        u, s, v = _lapack_svd(y, full=False)
    elif method == "jacobi":
        u, s, v = jacobi_svd(y)
    else:
        raise InvalidInputError(f"unknown SVD method {method!r}; choose from {SVD_METHODS}")
    u = np.array(u, order="C")
    v = np.array(v, order="C")
    _fix_signs(u, v, p)
    return SvdTriple(u, s, v)


def dense_svd_full(y, method: str = "lapack") -> SvdTriple:
    """Full SVD with square orthogonal left and right factors."""
    y = _as_finite_matrix(y)
    m, n = y.shape
    p = min(m, n)
    if method == "lapack":
        u, s, v = _lapack_svd(y, full=True)
    elif method == "jacobi":
        u, s, v = jacobi_svd(y)
        u = _complete_basis(u, m)
        v = _complete_basis(v, n)
    else:
        raise InvalidInputError(f"unknown SVD method {method!r}; choose from {SVD_METHODS}")
    u = np.array(u, order="C")
    v = np.array(v, order="C")
    _fix_signs(u, v, p)
    return SvdTriple(u, s, v)


class SparseSpdMatrix:
    """Symmetric positive (semi)definite matrix in CSR layout.

    Construction enforces structural and numerical symmetry exactly: the
    strict upper triangle is mirrored onto the lower one, so ``A[i, j]`` and
    ``A[j, i]`` are the same float.
    """

    def __init__(self, matrix, *, symmetrize: bool = True):
        csr = sp.csr_array(matrix, dtype=float)
        if csr.shape[0] != csr.shape[1]:
            raise DimensionError(f"matrix must be square, got {csr.shape}")
        if symmetrize:
            upper = sp.triu(csr, k=1, format="csr")
            csr = sp.csr_array(upper + upper.T + sp.diags_array(csr.diagonal()))
        csr.sum_duplicates()
        csr.sort_indices()
        if not np.all(np.isfinite(csr.data)):
            raise InvalidInputError("matrix contains non-finite entries")
        if np.any(csr.diagonal() <= 0):
            raise InvalidInputError("diagonal entries must be strictly positive")
        self._csr = csr
        self.symmetric = True

    @classmethod
    def from_triplets(cls, rows, cols, vals, n: int) -> "SparseSpdMatrix":
        coo = sp.coo_array((np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))), shape=(n, n))
        return cls(coo.tocsr())

    @property
    def n_rows(self) -> int:
        return self._csr.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def data(self) -> np.ndarray:
        return self._csr.data

    @property
    def csr(self) -> sp.csr_array:
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def __matmul__(self, x):
        return spmv(self, x) if np.ndim(x) == 1 else self._csr @ np.asarray(x, float)

    def __add__(self, other: "SparseSpdMatrix") -> "SparseSpdMatrix":
        return SparseSpdMatrix(self._csr + other._csr)

    def scaled(self, factor: float) -> "SparseSpdMatrix":
        return SparseSpdMatrix(self._csr * float(factor))

    def __repr__(self) -> str:
        return f"SparseSpdMatrix(n={self.n_rows}, nnz={self._csr.nnz})"


def spmv(a: SparseSpdMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (a.n_rows,):
        raise DimensionError(f"vector of length {a.n_rows} expected, got shape {x.shape}")
    return a.csr @ x


def conjugate_gradient(a: SparseSpdMatrix, b, *, rtol: float = 1e-14, maxiter: int | None = None) -> np.ndarray:
    """Plain CG; raises :class:`FactorizationError` on a non-positive curvature."""
    b = np.asarray(b, dtype=float)
    n = a.n_rows
    maxiter = maxiter or 10 * n
    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    stop = (rtol * max(1.0, np.sqrt(rr))) ** 2
    for _ in range(maxiter):
        if rr <= stop:
            break
        ap = a.csr @ p
        pap = p @ ap
        if pap <= 0:
            raise FactorizationError("conjugate gradient breakdown: matrix is not positive definite")
        step = rr / pap
        x += step * p
        r -= step * ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


class SpdFactor:
    """Reusable factorization of a constant SPD system matrix.

    A sparse LU without diagonal pivoting and with a symmetric fill-reducing
    ordering is an LDL^T factorization in disguise; the system is positive
    definite exactly when every pivot is positive, which is checked once.
    ``method="cg"`` skips the factorization and iterates instead.
    """

    def __init__(self, a: SparseSpdMatrix, method: str = "auto"):
        if method not in ("auto", "cholesky", "cg"):
            raise InvalidInputError(f"unknown solve method {method!r}")
        self.matrix = a
        self._lu = None
        self.method = "cg"
        if method in ("auto", "cholesky"):
            try:
                self._lu = self._factorize(a)
                self.method = "cholesky"
            except MemoryError:
                if method == "cholesky":
                    raise

    @staticmethod
    def _factorize(a: SparseSpdMatrix):
        try:
            lu = spla.splu(
                sp.csc_matrix(a.csr),
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:  # exactly singular
            raise FactorizationError(f"factorization failed: {exc}") from exc
        pivots = lu.U.diagonal()
        if not np.array_equal(lu.perm_r, lu.perm_c) or np.any(pivots <= 0):
            raise FactorizationError("matrix is not symmetric positive definite")
        return lu

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.matrix.n_rows,):
            raise DimensionError(f"right-hand side of length {self.matrix.n_rows} expected, got shape {b.shape}")
        if not np.all(np.isfinite(b)):
            raise InvalidInputError("right-hand side contains non-finite entries")
        if self._lu is not None:
            return self._lu.solve(b)
        return conjugate_gradient(self.matrix, b)

    def residual(self, x, b) -> float:
        return float(np.linalg.norm(self.matrix.csr @ x - b))


def spd_solve(a: SparseSpdMatrix, b, method: str = "auto") -> np.ndarray:
    """Solve ``a x = b`` for a one-off right-hand side."""
    b = np.asarray(b, dtype=float)
    if b.shape != (a.n_rows,):
        raise DimensionError(f"right-hand side of length {a.n_rows} expected, got shape {b.shape}")
    return SpdFactor(a, method).solve(b)
