import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracstream.errors import DimensionError, FactorizationError, InvalidInputError
from fracstream.grid import assemble_mass, assemble_stiffness, build_grid
from fracstream.linalg import (
    SparseSpdMatrix,
    SpdFactor,
    conjugate_gradient,
    dense_svd_econ,
    dense_svd_full,
    jacobi_svd,
    spd_solve,
    spmv,
)

METHODS = ["lapack", "jacobi"]


def _orth_err(x):
    return np.abs(x.T @ x - np.eye(x.shape[1])).max()


@pytest.mark.parametrize("method", METHODS)
class TestDenseSvd:
    def test_diagonal(self, method):
        s = dense_svd_econ(np.diag([3.0, 1.0]), method)
        np.testing.assert_allclose(s.sigma, [3, 1], atol=1e-15)
        np.testing.assert_allclose(s.q_factor, np.eye(2), atol=1e-15)
        np.testing.assert_allclose(s.r_factor, np.eye(2), atol=1e-15)

    def test_zero_matrix(self, method):
        s = dense_svd_econ(np.zeros((2, 2)), method)
        np.testing.assert_array_equal(s.sigma, [0, 0])

    def test_single_column(self, method):
        # |(3, 4)| = sqrt(9 + 16)
        s = dense_svd_econ(np.array([[3.0], [4.0]]), method)
        assert s.sigma.shape == (1,)
        assert s.sigma[0] == pytest.approx(5.0, abs=1e-14)
        # sign convention: largest entry of each left vector is positive
        np.testing.assert_allclose(s.q_factor[:, 0], [0.6, 0.8], atol=1e-15)

    def test_full_bordered_identity(self, method):
        s = dense_svd_full(np.array([[1.0, 0.0], [0.0, 1.0]]), method)
        np.testing.assert_allclose(s.sigma, [1, 1], atol=1e-15)
        s = dense_svd_full(np.eye(3), method)
        np.testing.assert_allclose(s.sigma, [1, 1, 1], atol=1e-15)

    def test_full_two_by_two(self, method):
        # eigenvalues of Y^T Y = [[4, 2], [2, 2]] by the quadratic formula
        tr, det = 6.0, 4.0
        lam = [(tr + np.sqrt(tr**2 - 4 * det)) / 2, (tr - np.sqrt(tr**2 - 4 * det)) / 2]
        expected = np.sqrt(lam)
        np.testing.assert_allclose(expected, [2.2882456, 0.8740320], atol=1e-7)
        s = dense_svd_full(np.array([[2.0, 1.0], [0.0, 1.0]]), method)
        np.testing.assert_allclose(s.sigma, expected, rtol=1e-14)

    def test_full_factors_are_square(self, method):
        y = np.random.default_rng(1).standard_normal((3, 5))
        s = dense_svd_full(y, method)
        assert s.q_factor.shape == (3, 3) and s.r_factor.shape == (5, 5)
        assert _orth_err(s.q_factor) < 1e-12 and _orth_err(s.r_factor) < 1e-12
        np.testing.assert_allclose(s.reconstruct(), y, atol=1e-13)

    def test_non_finite_rejected(self, method):
        with pytest.raises(InvalidInputError):
            dense_svd_econ(np.array([[1.0, np.nan]]), method)
        with pytest.raises(InvalidInputError):
            dense_svd_full(np.array([[np.inf]]), method)

    def test_rank_deficient_full(self, method):
        y = np.outer([1.0, 2.0, 2.0], [1.0, 0.0, 1.0])
        s = dense_svd_full(y, method)
        assert s.sigma[0] == pytest.approx(3 * np.sqrt(2), rel=1e-14)
        assert _orth_err(s.q_factor) < 1e-12 and _orth_err(s.r_factor) < 1e-12


def test_unknown_method():
    with pytest.raises(InvalidInputError):
        dense_svd_econ(np.eye(2), "magic")


matrices = st.tuples(st.integers(1, 7), st.integers(1, 7)).flatmap(
    lambda shape: arrays(np.float64, shape, elements=st.floats(-1e3, 1e3, allow_nan=False))
)


@settings(max_examples=60, deadline=None)
@given(matrices, st.sampled_from(METHODS), st.booleans())
def test_svd_contract(y, method, full):
    s = (dense_svd_full if full else dense_svd_econ)(y, method)
    scale = max(1.0, np.linalg.norm(y))
    assert np.linalg.norm(y - s.reconstruct()) <= 1e-12 * scale
    assert s.sigma.shape == (min(y.shape),)
    assert np.all(s.sigma >= 0) and np.all(np.diff(s.sigma) <= 0)
    assert _orth_err(s.q_factor) <= 1e-12
    assert _orth_err(s.r_factor) <= 1e-12


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(7)
    for shape in [(6, 6), (10, 4), (4, 10), (30, 31)]:
        y = rng.standard_normal(shape)
        np.testing.assert_allclose(jacobi_svd(y)[1], np.linalg.svd(y, compute_uv=False), rtol=1e-12)


def test_jacobi_extreme_scales():
    # squared column norms would underflow to zero here
    a = np.array([[1e3, 1e-300], [0.0, 1e-170]])
    _, s, _ = jacobi_svd(a)
    np.testing.assert_allclose(s, np.linalg.svd(a, compute_uv=False), rtol=1e-14)
    tiny = np.full((2, 2), 2.75e-234)
    t = dense_svd_econ(tiny, "jacobi")
    assert _orth_err(t.q_factor) <= 1e-12
    assert t.sigma[0] == pytest.approx(5.5e-234, rel=1e-14)


def test_interlacing_of_appended_column():
    rng = np.random.default_rng(3)
    for _ in range(20):
        y = rng.standard_normal((6, 6))
        col = rng.standard_normal((6, 1))
        s_y = dense_svd_full(y).sigma
        s_aug = dense_svd_full(np.hstack([y, col])).sigma
        # 6 x 7 has 6 values: s_aug[i] >= s_y[i] >= s_aug[i+1]
        assert np.all(s_aug >= s_y - 1e-12)
        assert np.all(s_y[:-1] >= s_aug[1:] - 1e-12)


def _spd(n, seed):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((n, n))
    return b @ b.T + n * np.eye(n)


class TestSparseSpd:
    def test_exact_symmetry(self):
        a = SparseSpdMatrix(_spd(5, 0))
        dense = a.toarray()
        assert np.array_equal(dense, dense.T)

    def test_rejects_nonpositive_diagonal(self):
        with pytest.raises(InvalidInputError):
            SparseSpdMatrix(np.diag([1.0, 0.0]))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            SparseSpdMatrix(np.ones((2, 3)))

    def test_spmv_identity_and_diag(self):
        x = np.array([1.5, -2.0, 3.0])
        np.testing.assert_array_equal(spmv(SparseSpdMatrix(np.eye(3)), x), x)
        n = 6
        np.testing.assert_array_equal(spmv(SparseSpdMatrix(np.diag(np.arange(1.0, n + 1))), np.ones(n)), np.arange(1.0, n + 1))

    def test_spmv_against_dense(self):
        dense = _spd(5, 1)
        x = np.random.default_rng(2).standard_normal(5)
        got = spmv(SparseSpdMatrix(dense), x)
        assert np.abs(got - dense @ x).max() <= 1e-14 * np.abs(dense @ x).max() + 1e-14

    def test_spmv_dimension(self):
        with pytest.raises(DimensionError):
            spmv(SparseSpdMatrix(np.eye(3)), np.ones(2))


class TestSpdSolve:
    def test_identity(self):
        b = np.array([0.3, -1.0, 2.0])
        np.testing.assert_allclose(spd_solve(SparseSpdMatrix(np.eye(3)), b), b, atol=0)

    def test_diagonal(self):
        np.testing.assert_allclose(spd_solve(SparseSpdMatrix(np.diag([2.0, 4.0])), np.array([2.0, 8.0])), [1, 2])

    @pytest.mark.parametrize("method", ["auto", "cholesky", "cg"])
    def test_fem_system_matches_dense_lu(self, method):
        grid = build_grid(4)
        mass, stiff = assemble_mass(grid), assemble_stiffness(grid)
        a = mass + stiff
        b = mass @ np.ones(grid.n_dofs)
        lu = scipy.linalg.lu_factor(a.toarray())
        expected = scipy.linalg.lu_solve(lu, b)
        x = spd_solve(a, b, method)
        np.testing.assert_allclose(x, expected, atol=1e-10)
        assert np.linalg.norm(a @ x - b) <= 1e-12 * max(1.0, np.linalg.norm(b))

    def test_round_trip_residual(self):
        a = SparseSpdMatrix(_spd(30, 4))
        b = np.random.default_rng(5).standard_normal(30) * 100
        x = SpdFactor(a).solve(b)
        assert np.linalg.norm(a @ x - b) <= 1e-12 * max(1.0, np.linalg.norm(b))

    def test_deterministic(self):
        a = SparseSpdMatrix(_spd(20, 6))
        b = np.arange(20.0)
        assert np.array_equal(spd_solve(a, b), spd_solve(a, b))

    def test_indefinite_detected(self):
        a = SparseSpdMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(FactorizationError):
            SpdFactor(a)
        with pytest.raises(FactorizationError):
            conjugate_gradient(a, np.array([1.0, -1.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            spd_solve(SparseSpdMatrix(np.eye(3)), np.ones(4))
