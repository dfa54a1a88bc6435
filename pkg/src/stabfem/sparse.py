"""Compressed-sparse-row matrices with a structurally symmetric pattern.

Nodal vectors are plain 1-D numpy arrays.  The pattern always stores the
(j, i) slot whenever (i, j) is stored, keeping explicit zeros, because the
limiter needs both a_ij and a_ji for every neighbour pair even when one of
them cancels numerically.  Factorization is delegated to SuperLU and
cached on the matrix, so repeated solves with one matrix reuse it.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.io import mmwrite


class SingularMatrixError(Exception):
    """Raised when a factorization meets a (numerically) zero pivot."""


class SparseMatrix:
    """Square CSR matrix; column indices sorted and unique within rows."""

    def __init__(self, n, row_ptr, col_idx, values):
        self.n = int(n)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(col_idx, dtype=np.int64)
        self.values = np.asarray(values, dtype=float)
        if len(self.row_ptr) != self.n + 1:
            raise ValueError("row_ptr length must be n + 1")
        if len(self.col_idx) != len(self.values):
            raise ValueError("col_idx and values length mismatch")
        self._lu = None

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def from_coo(cls, n, rows, cols, vals) -> "SparseMatrix":
        """Build from triplets; duplicates summed, pattern symmetrized."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        # symmetrize the pattern with explicit zeros
        a = sps.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        a.sum_duplicates()
        a.sort_indices()
        pattern = sps.csr_matrix(
            (np.ones_like(a.data), a.indices, a.indptr), shape=(n, n)
        )
        full = (pattern + pattern.T).tocsr()
        full.sort_indices()
        values = np.zeros(len(full.indices))
        # scatter a's entries into the union pattern via global (row, col) keys
        rows_full = np.repeat(np.arange(n, dtype=np.int64), np.diff(full.indptr))
        rows_a = np.repeat(np.arange(n, dtype=np.int64), np.diff(a.indptr))
        key_full = rows_full * n + full.indices
        key_a = rows_a * n + a.indices
        values[np.searchsorted(key_full, key_a)] = a.data
        return cls(n, full.indptr, full.indices, values)

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls(n, np.arange(n + 1), idx, np.ones(n))

    def copy_with_values(self, values) -> "SparseMatrix":
        values = np.asarray(values, dtype=float)
        if len(values) != len(self.values):
            raise ValueError("value array does not match the pattern")
        return SparseMatrix(self.n, self.row_ptr, self.col_idx, values)

    # ------------------------------------------------------------------
    # access

    @property
    def nnz(self) -> int:
        return len(self.values)

    def slot(self, i: int, j: int) -> int:
        """Storage index of entry (i, j); -1 if not in the pattern."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        k = lo + np.searchsorted(self.col_idx[lo:hi], j)
        if k < hi and self.col_idx[k] == j:
            return int(k)
        return -1

    def entry(self, i: int, j: int) -> float:
        k = self.slot(i, j)
        return float(self.values[k]) if k >= 0 else 0.0

    def transpose_permutation(self) -> np.ndarray:
        """t with values[t[k]] = value of the transposed slot of k.

        Requires the symmetric pattern this class guarantees.
        """
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        order = np.lexsort((rows, self.col_idx))
        t = np.empty(self.nnz, dtype=np.int64)
        t[order] = np.arange(self.nnz)
        # order sorts slots by (col, row) = CSR order of the transpose
        check = self.col_idx[t]
        if not np.array_equal(check, rows):
            raise ValueError("pattern is not structurally symmetric")
        return t

    def diagonal_slots(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        slots = np.nonzero(self.col_idx == rows)[0]
        if len(slots) != self.n:
            raise ValueError("pattern is missing diagonal entries")
        return slots

    def to_scipy(self) -> sps.csr_matrix:
        return sps.csr_matrix(
            (self.values, self.col_idx, self.row_ptr), shape=(self.n, self.n)
        )

    def dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def mm_write(self, path) -> None:
        """Dump in MatrixMarket coordinate format."""
        mmwrite(str(path), self.to_scipy())

    # ------------------------------------------------------------------
    # algebra

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"dimension mismatch: matrix {self.n}, vector {x.shape}")
        return self.to_scipy() @ x

    def factor(self) -> "LUFactor":
        if self._lu is None:
            self._lu = LUFactor(self)
        return self._lu


class LUFactor:
    """Sparse LU of a SparseMatrix; read-only after construction."""

    def __init__(self, a: SparseMatrix):
        scale = np.max(np.abs(a.values)) if a.nnz else 0.0
        try:
            self._lu = spla.splu(a.to_scipy().tocsc())
        except RuntimeError as err:
            raise SingularMatrixError(str(err)) from err
        piv = np.abs(self._lu.U.diagonal())
        if scale == 0.0 or piv.min() <= 1e-14 * scale:
            raise SingularMatrixError(
                f"zero pivot: min |U_ii| = {piv.min() if a.nnz else 0.0:g}"
            )
        self.n = a.n

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.n,):
            raise ValueError("right-hand side dimension mismatch")
        return self._lu.solve(rhs)


def matvec(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    return a.matvec(x)


def factor_and_solve(a: SparseMatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve a x = rhs with a cached direct factorization of a."""
    return a.factor().solve(rhs)
