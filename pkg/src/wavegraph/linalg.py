"""Dense and compressed-sparse-row matrix primitives.

Dense matrices are plain 2-D C-contiguous float64 numpy arrays (rows/cols
are the shape, the buffer is the row-major data). SparseMatrix is a CSR
triplet with sorted column indices inside each row and no explicitly
stored zeros after `sparsify`. Everything here is pure and deterministic;
gradients live elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DataError, ParameterError, ShapeError

DenseMatrix = np.ndarray


def as_dense(values, rows: int | None = None, cols: int | None = None) -> DenseMatrix:
    """Coerce to a validated 2-D float64 array (finite entries only)."""
    a = np.ascontiguousarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"dense matrix must be 2-D, got ndim={a.ndim}")
    if rows is not None and a.shape != (rows, cols):
        raise ShapeError(f"expected shape {(rows, cols)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError("dense matrix contains non-finite entries")
    return a


@dataclass
class SparseMatrix:
    """CSR matrix over float64.

    row_offsets has rows+1 nondecreasing entries ending at nnz;
    col_indices are strictly increasing within each row.
    Instances are treated as immutable after construction.
    """

    rows: int
    cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _scipy: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def to_scipy(self) -> sp.csr_matrix:
        if self._scipy is None:
            self._scipy = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets),
                shape=(self.rows, self.cols),
            )
        return self._scipy

    def check_invariants(self) -> None:
        off = self.row_offsets
        if off.shape != (self.rows + 1,) or off[0] != 0 or off[-1] != len(self.values):
            raise DataError("row_offsets inconsistent with nnz")
        if np.any(np.diff(off) < 0):
            raise DataError("row_offsets not nondecreasing")
        if len(self.col_indices) != len(self.values):
            raise DataError("col_indices/values length mismatch")
        if self.nnz:
            if self.col_indices.min() < 0 or self.col_indices.max() >= self.cols:
                raise DataError("column index out of range")
            for r in range(self.rows):
                cs = self.col_indices[off[r]:off[r + 1]]
                if cs.size > 1 and np.any(np.diff(cs) <= 0):
                    raise DataError(f"columns not strictly increasing in row {r}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("sparse matrix contains non-finite values")


def from_scipy(m) -> SparseMatrix:
    csr = m.tocsr()
    csr.sum_duplicates()
    csr.sort_indices()
    csr.eliminate_zeros()
    return SparseMatrix(
        rows=int(csr.shape[0]),
        cols=int(csr.shape[1]),
        row_offsets=np.asarray(csr.indptr, dtype=np.int64),
        col_indices=np.asarray(csr.indices, dtype=np.int64),
        values=np.ascontiguousarray(csr.data, dtype=np.float64),
    )


def from_coo(rows: int, cols: int, r_idx, c_idx, vals) -> SparseMatrix:
    """Build CSR from triplets; duplicate (row, col) entries are summed."""
    r = np.asarray(r_idx, dtype=np.int64)
    c = np.asarray(c_idx, dtype=np.int64)
    v = np.asarray(vals, dtype=np.float64)
    if not (len(r) == len(c) == len(v)):
        raise ShapeError("COO triplet arrays differ in length")
    if len(r) and (r.min() < 0 or r.max() >= rows or c.min() < 0 or c.max() >= cols):
        raise DataError("COO index out of range")
    if not np.all(np.isfinite(v)):
        raise DataError("COO values contain non-finite entries")
    return from_scipy(sp.coo_matrix((v, (r, c)), shape=(rows, cols)))


def identity(n: int) -> SparseMatrix:
    idx = np.arange(n, dtype=np.int64)
    return SparseMatrix(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))


def zeros(rows: int, cols: int) -> SparseMatrix:
    return SparseMatrix(
        rows, cols,
        np.zeros(rows + 1, dtype=np.int64),
        np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.float64),
    )


def densify(s: SparseMatrix) -> DenseMatrix:
    return np.ascontiguousarray(s.to_scipy().toarray(), dtype=np.float64)


def spmm(s: SparseMatrix, d: DenseMatrix) -> DenseMatrix:
    """Sparse @ dense product."""
    if s.cols != d.shape[0]:
        raise ShapeError(f"spmm: {s.rows}x{s.cols} @ {d.shape[0]}x{d.shape[1]}")
    return np.ascontiguousarray(s.to_scipy() @ d)


def dense_matmul(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    return a @ b


def sparsify(d: DenseMatrix, t: float) -> SparseMatrix:
    """Drop entries with |value| < t; keep the rest exactly."""
    if t < 0:
        raise ParameterError(f"sparsify threshold must be >= 0, got {t}")
    d = as_dense(d)
    keep = np.abs(d) >= t if t > 0 else d != 0.0
    r, c = np.nonzero(keep)
    return from_coo(d.shape[0], d.shape[1], r, c, d[r, c])


def transpose_sparse(s: SparseMatrix) -> SparseMatrix:
    return from_scipy(s.to_scipy().T)
