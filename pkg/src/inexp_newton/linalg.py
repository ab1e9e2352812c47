"""Sparse CSR kernels, norms and extremal singular value estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

#: Above this size ``sigma_extremes`` stops using a dense SVD for sigma_min.
DENSE_SVD_THRESHOLD = 512


class SingularMatrixError(ArithmeticError):
    """Raised when a factorization meets a numerically zero pivot."""


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Real sparse matrix in compressed sparse row form.

    Column indices are strictly increasing within each row and all values
    are finite; both are checked on construction.  Instances are treated as
    immutable and may be shared between threads.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _rows: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        col_idx = np.asarray(self.col_idx, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("matrix dimensions must be positive")
        if row_ptr.shape != (self.n_rows + 1,):
            raise ValueError("row_ptr must have n_rows + 1 entries")
        nnz = col_idx.size
        if row_ptr[0] != 0 or row_ptr[-1] != nnz or values.size != nnz:
            raise ValueError("row_ptr is inconsistent with the stored entries")
        counts = np.diff(row_ptr)
        if np.any(counts < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if nnz and (col_idx.min() < 0 or col_idx.max() >= self.n_cols):
            raise ValueError("column index out of range")
        rows = np.repeat(np.arange(self.n_rows, dtype=np.int64), counts)
        if nnz > 1:
            same_row = rows[1:] == rows[:-1]
            if np.any(col_idx[1:][same_row] <= col_idx[:-1][same_row]):
                raise ValueError("column indices must be strictly increasing within a row")
        if not np.all(np.isfinite(values)):
            raise ValueError("matrix values must be finite")
        for name, arr in (("row_ptr", row_ptr), ("col_idx", col_idx), ("values", values), ("_rows", rows)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.col_idx.size)

    @classmethod
    def from_scipy(cls, mat) -> CsrMatrix:
        csr = sp.csr_matrix(mat, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, arr) -> CsrMatrix:
        arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        return cls.from_scipy(sp.csr_matrix(arr))

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> CsrMatrix:
        return cls(n, n, np.arange(n + 1), np.arange(n), np.full(n, float(scale)))

    @classmethod
    def diag(cls, entries) -> CsrMatrix:
        entries = np.asarray(entries, dtype=np.float64)
        n = entries.size
        return cls(n, n, np.arange(n + 1), np.arange(n), entries)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values.copy(), self.col_idx.copy(), self.row_ptr.copy()), shape=self.shape
        )

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self._rows, self.col_idx] = self.values
        return out

    def scaled(self, factor: float) -> CsrMatrix:
        return CsrMatrix(self.n_rows, self.n_cols, self.row_ptr, self.col_idx, self.values * factor)

    def add_diagonal(self, shift) -> CsrMatrix:
        """Return ``self + diag(shift)``, creating diagonal entries as needed."""
        if self.n_rows != self.n_cols:
            raise ValueError("add_diagonal needs a square matrix")
        shift = np.asarray(shift, dtype=np.float64)
        if shift.shape != (self.n_rows,):
            raise ValueError("diagonal shift has the wrong length")
        on_diag = self._rows == self.col_idx
        present = np.zeros(self.n_rows, dtype=bool)
        present[self._rows[on_diag]] = True
        if present.all():
            values = self.values.copy()
            values[on_diag] += shift[self._rows[on_diag]]
            return CsrMatrix(self.n_rows, self.n_cols, self.row_ptr, self.col_idx, values)
        return CsrMatrix.from_scipy(self.to_scipy() + sp.diags(shift))

    def __matmul__(self, x):
        return matvec(self, x)


def _as_vector(x, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != n:
        raise ValueError(f"dimension mismatch: {what} expects length {n}, got shape {x.shape}")
    return x


def matvec(A: CsrMatrix, x) -> np.ndarray:
    """Return ``A @ x``."""
    x = _as_vector(x, A.n_cols, "matvec")
    return np.bincount(A._rows, weights=A.values * x[A.col_idx], minlength=A.n_rows)


def matvec_transpose(A: CsrMatrix, x) -> np.ndarray:
    """Return ``A.T @ x`` without forming the transpose."""
    x = _as_vector(x, A.n_rows, "matvec_transpose")
    return np.bincount(A.col_idx, weights=A.values * x[A._rows], minlength=A.n_cols)


def norm2(x) -> float:
    """Euclidean norm, robust to overflow for large entries."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    scale = float(np.max(np.abs(x)))
    if scale == 0.0 or not math.isfinite(scale):
        return scale
    return scale * math.sqrt(float(np.dot(x / scale, x / scale)))


class SigmaEstimate(NamedTuple):
    sigma_min: float
    sigma_max: float
    iterations_used: int
    converged: bool


def _power_sigma_max(A: CsrMatrix, tol: float, max_iter: int, rng) -> tuple[float, int, bool]:
    v = rng.standard_normal(A.n_cols)
    v /= norm2(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = matvec_transpose(A, matvec(A, v))
        new = float(np.dot(v, w))
        nw = norm2(w)
        if nw == 0.0:
            return 0.0, it, True
        v = w / nw
        if it > 1 and abs(new - lam) <= tol * abs(new):
            return math.sqrt(max(new, 0.0)), it, True
        lam = new
    return math.sqrt(max(lam, 0.0)), max_iter, False


def _inverse_sigma_min(A: CsrMatrix, tol: float, max_iter: int) -> tuple[float, int, bool]:
    # Lanczos on (A^T A)^{-1} through one sparse LU of A.
    try:
        lu = spla.splu(A.to_scipy().tocsc())
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    diag_u = lu.U.diagonal()
    if np.any(diag_u == 0) or np.min(np.abs(diag_u)) <= np.finfo(float).eps * np.max(np.abs(diag_u)):
        raise SingularMatrixError("numerically zero pivot in sparse LU")
    n = A.n_rows
    count = [0]

    def apply(v):
        count[0] += 1
        return lu.solve(lu.solve(np.asarray(v).ravel(), trans="T"))

    op = spla.LinearOperator((n, n), matvec=apply, dtype=np.float64)
    v0 = np.ones(n) / math.sqrt(n)
    try:
        vals = spla.eigsh(op, k=1, which="LA", tol=tol, maxiter=max_iter, v0=v0,
                          return_eigenvectors=False)
        converged = True
    except spla.ArpackNoConvergence as exc:
        vals = exc.eigenvalues
        converged = False
        if len(vals) == 0:
            return 0.0, count[0], False
    return 1.0 / math.sqrt(float(vals[0])), count[0], converged


def sigma_extremes(A: CsrMatrix, tol: float = 1e-10, max_iter: int = 10_000,
                   dense_threshold: int = DENSE_SVD_THRESHOLD, seed: int = 0) -> SigmaEstimate:
    """Estimate the smallest and largest singular values of a square matrix.

    ``sigma_max`` comes from power iteration on ``A^T A``.  ``sigma_min`` is
    taken from a dense SVD when ``n <= dense_threshold`` and otherwise from
    Lanczos-accelerated inverse iteration on ``A^T A`` using a sparse LU of
    ``A``.

    Raises
    ------
    SingularMatrixError
        If the sparse factorization meets a numerically zero pivot.
    """
    if A.n_rows != A.n_cols:
        raise ValueError("sigma_extremes needs a square matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    smax, it_max, ok_max = _power_sigma_max(A, tol, max_iter, rng)
    if A.n_rows <= dense_threshold:
        svals = np.linalg.svd(A.to_dense(), compute_uv=False)
        smin, it_min, ok_min = float(svals[-1]), 0, True
    else:
        smin, it_min, ok_min = _inverse_sigma_min(A, tol, max_iter)
    # Power iteration approaches sigma_max from below; keep the pair ordered.
    smax = max(smax, smin)
    return SigmaEstimate(smin, smax, it_max + it_min, ok_max and ok_min)


def write_matrix_market(path, A: CsrMatrix) -> None:
    """Write ``A`` in Matrix Market coordinate real general format."""
    path = Path(path)
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, A.to_scipy().tocoo(), field="real", precision=17, symmetry="general")


def read_matrix_market(path) -> CsrMatrix:
    mat = scipy.io.mmread(str(path))
    if not sp.issparse(mat):
        mat = sp.csr_matrix(mat)
    return CsrMatrix.from_scipy(mat)
