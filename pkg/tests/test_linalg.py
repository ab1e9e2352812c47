import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from inexp_newton.linalg import (
    CsrMatrix,
    SingularMatrixError,
    matvec,
    matvec_transpose,
    norm2,
    read_matrix_market,
    sigma_extremes,
    write_matrix_market,
)
from oracles import dense_sigmas


def random_csr(rng, m, n, density=0.4):
    M = sp.random(m, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    return CsrMatrix.from_scipy(M)


class TestCsrMatrix:
    def test_validates_row_ptr(self):
        with pytest.raises(ValueError):
            CsrMatrix(2, 2, [0, 2, 1], [0, 1], [1.0, 2.0])
        with pytest.raises(ValueError):
            CsrMatrix(2, 2, [1, 1, 2], [0, 1], [1.0, 2.0])

    def test_validates_columns(self):
        with pytest.raises(ValueError):
            CsrMatrix(1, 2, [0, 2], [1, 0], [1.0, 2.0])
        with pytest.raises(ValueError):
            CsrMatrix(1, 2, [0, 2], [0, 0], [1.0, 2.0])
        with pytest.raises(ValueError):
            CsrMatrix(1, 2, [0, 1], [2], [1.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            CsrMatrix(1, 1, [0, 1], [0], [np.nan])

    def test_arrays_are_read_only(self):
        A = CsrMatrix.identity(3)
        with pytest.raises(ValueError):
            A.values[0] = 5.0

    def test_dense_round_trip(self):
        D = np.array([[0.0, 1.5, 0.0], [2.0, 0.0, -3.0]])
        A = CsrMatrix.from_dense(D)
        assert A.nnz == 3
        assert_array_equal(A.to_dense(), D)
        assert_array_equal(A.to_scipy().toarray(), D)

    def test_add_diagonal_with_fill_in(self):
        A = CsrMatrix.from_dense([[0.0, 1.0], [1.0, 0.0]])
        B = A.add_diagonal(np.array([2.0, -1.0]))
        assert_array_equal(B.to_dense(), [[2.0, 1.0], [1.0, -1.0]])
        C = B.add_diagonal(np.array([1.0, 1.0]))
        assert_array_equal(C.to_dense(), [[3.0, 1.0], [1.0, 0.0]])

    def test_matrix_market_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        A = random_csr(rng, 7, 7)
        path = tmp_path / "a.mtx"
        write_matrix_market(path, A)
        assert path.read_text().startswith("%%MatrixMarket matrix coordinate real general")
        B = read_matrix_market(path)
        assert_array_equal(B.to_dense(), A.to_dense())


class TestMatvec:
    def test_identity(self):
        assert_array_equal(matvec(CsrMatrix.identity(2), [3.0, -1.0]), [3.0, -1.0])

    def test_diagonal(self):
        assert_array_equal(matvec(CsrMatrix.diag([2.0, 4.0]), [1.0, 1.0]), [2.0, 4.0])

    def test_permutation(self):
        P = CsrMatrix.from_dense([[0, 1], [1, 0]])
        assert_array_equal(matvec(P, [5.0, 7.0]), [7.0, 5.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matvec(CsrMatrix.identity(2), [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            matvec_transpose(CsrMatrix.identity(2), [1.0])

    def test_empty_rows(self):
        A = CsrMatrix(3, 2, [0, 0, 1, 1], [1], [2.0])
        assert_array_equal(matvec(A, [1.0, 3.0]), [0.0, 6.0, 0.0])


class TestMatvecTranspose:
    def test_identity(self):
        assert_array_equal(matvec_transpose(CsrMatrix.identity(2), [1.0, 2.0]), [1.0, 2.0])

    def test_hand_expansion(self):
        A = CsrMatrix.from_dense([[1, 2], [0, 1]])
        assert_array_equal(matvec_transpose(A, [1.0, 0.0]), [1.0, 2.0])

    def test_random_against_dense(self):
        rng = np.random.default_rng(1)
        A = random_csr(rng, 5, 5, 0.6)
        x = rng.standard_normal(5)
        assert_allclose(matvec_transpose(A, x), A.to_dense().T @ x, atol=1e-14)

    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1))
    def test_adjointness(self, m, n, seed):
        rng = np.random.default_rng(seed)
        A = random_csr(rng, m, n, 0.5)
        x, y = rng.standard_normal(n), rng.standard_normal(m)
        lhs = np.dot(matvec(A, x), y)
        rhs = np.dot(x, matvec_transpose(A, y))
        normA = np.linalg.norm(A.to_dense(), 2) if A.nnz else 0.0
        assert abs(lhs - rhs) <= 1e-12 * max(normA, 1e-300) * norm2(x) * norm2(y) + 1e-300


class TestNorm2:
    def test_examples(self):
        assert norm2([0.0, 0.0, 0.0]) == 0.0
        assert norm2([3.0, 4.0]) == 5.0
        assert norm2([1.0, 1.0, 1.0, 1.0]) == 2.0

    def test_no_overflow(self):
        assert_allclose(norm2([3e200, 4e200]), 5e200, rtol=1e-15)

    def test_no_underflow(self):
        assert_allclose(norm2([3e-200, 4e-200]), 5e-200, rtol=1e-15)

    @given(st.lists(st.floats(-1e100, 1e100), min_size=1, max_size=20),
           st.floats(-1e50, 1e50))
    def test_homogeneous(self, xs, c):
        x = np.array(xs)
        lhs, rhs = norm2(c * x), abs(c) * norm2(x)
        assert lhs == pytest.approx(rhs, rel=4 * len(xs) * np.finfo(float).eps, abs=1e-300)


class TestSigmaExtremes:
    def test_diagonal(self):
        est = sigma_extremes(CsrMatrix.diag([2.0, 5.0]))
        assert est.sigma_min == pytest.approx(2.0, rel=1e-10)
        assert est.sigma_max == pytest.approx(5.0, rel=1e-10)
        assert est.converged

    def test_scalar(self):
        est = sigma_extremes(CsrMatrix.identity(4, 3.0))
        assert est.sigma_min == pytest.approx(3.0)
        assert est.sigma_max == pytest.approx(3.0)

    def test_dense_random_against_svd(self):
        rng = np.random.default_rng(2)
        D = rng.standard_normal((8, 8))
        ref_min, ref_max = dense_sigmas(D)
        est = sigma_extremes(CsrMatrix.from_dense(D))
        assert_allclose([est.sigma_min, est.sigma_max], [ref_min, ref_max], rtol=1e-8)

    def test_iterative_path_against_svd(self):
        rng = np.random.default_rng(4)
        D = rng.standard_normal((40, 40)) * (rng.uniform(size=(40, 40)) < 0.3) + 4 * np.eye(40)
        ref_min, ref_max = dense_sigmas(D)
        est = sigma_extremes(CsrMatrix.from_dense(D), dense_threshold=10)
        assert est.converged
        assert_allclose([est.sigma_min, est.sigma_max], [ref_min, ref_max], rtol=1e-8)

    def test_singular_detected_on_iterative_path(self):
        # third row is empty, so the matrix is exactly singular
        A = CsrMatrix(4, 4, [0, 1, 2, 2, 3], [0, 1, 3], [1.0, 2.0, 3.0])
        with pytest.raises(SingularMatrixError):
            sigma_extremes(A, dense_threshold=1)

    def test_requires_square_and_positive_tol(self):
        with pytest.raises(ValueError):
            sigma_extremes(CsrMatrix.from_dense(np.ones((2, 3))))
        with pytest.raises(ValueError):
            sigma_extremes(CsrMatrix.identity(2), tol=0.0)

    @given(st.lists(st.floats(0.01, 100.0), min_size=1, max_size=10),
           st.lists(st.booleans(), min_size=10, max_size=10))
    def test_diagonal_property(self, entries, signs):
        d = np.array(entries) * np.where(signs[:len(entries)], 1.0, -1.0)
        est = sigma_extremes(CsrMatrix.diag(d))
        assert est.sigma_min <= est.sigma_max
        assert est.sigma_min == pytest.approx(np.abs(d).min(), rel=1e-8)
        assert est.sigma_max == pytest.approx(np.abs(d).max(), rel=1e-8)
