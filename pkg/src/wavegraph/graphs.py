"""Graph construction and spectral preprocessing.

Covers the symmetric normalized Laplacian, its [-1, 1] rescaling, a
deterministic power-iteration bound on the top eigenvalue, and Gaussian
kNN graph construction for datasets whose graphs are implicit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, ParameterError
from .linalg import DenseMatrix, SparseMatrix, from_coo, transpose_sparse

UNLABELED = -1

# Upper bound on the spectrum of any symmetric normalized Laplacian; also
# the rescaling constant under which the wavelet kernel e^{-s(x+1)} agrees
# with e^{-s*lambda} on actual eigenvalues.
LAMBDA_MAX_BOUND = 2.0


@dataclass
class ModalityGraph:
    """One modality: graph, node features, labels, and split masks."""

    n_nodes: int
    adjacency: SparseMatrix
    features: DenseMatrix
    labels: np.ndarray            # int64, UNLABELED sentinel for unknown
    train_mask: np.ndarray        # bool
    val_mask: np.ndarray
    test_mask: np.ndarray

    def validate(self, tol: float = 1e-12) -> None:
        n = self.n_nodes
        if self.adjacency.rows != n or self.adjacency.cols != n:
            raise DataError("adjacency shape does not match n_nodes")
        if self.features.shape[0] != n:
            raise DataError("feature row count does not match n_nodes")
        if self.adjacency.nnz and self.adjacency.values.min() < 0:
            raise DataError("adjacency has negative edge weights")
        at = transpose_sparse(self.adjacency)
        if (at.nnz != self.adjacency.nnz
                or np.any(at.col_indices != self.adjacency.col_indices)
                or np.any(at.row_offsets != self.adjacency.row_offsets)
                or (self.adjacency.nnz
                    and np.max(np.abs(at.values - self.adjacency.values)) > tol)):
            raise DataError("adjacency is not symmetric")
        diag = self.adjacency.to_scipy().diagonal()
        if np.any(diag != 0):
            raise DataError("adjacency diagonal is not all zero")
        for m in (self.train_mask, self.val_mask, self.test_mask):
            if m.shape != (n,) or m.dtype != bool:
                raise DataError("masks must be boolean vectors of length n_nodes")
        overlap = (self.train_mask.astype(int) + self.val_mask.astype(int)
                   + self.test_mask.astype(int))
        if overlap.max(initial=0) > 1:
            raise DataError("train/val/test masks overlap")
        if np.any(self.labels[self.train_mask] == UNLABELED):
            raise DataError("a train-mask node has no label")

    def with_masks(self, train, val, test) -> "ModalityGraph":
        g = replace(self, train_mask=np.asarray(train, dtype=bool),
                    val_mask=np.asarray(val, dtype=bool),
                    test_mask=np.asarray(test, dtype=bool))
        g.validate()
        return g


def empty_masks(n: int) -> np.ndarray:
    return np.zeros(n, dtype=bool)


def make_graph(adjacency: SparseMatrix, features, labels) -> ModalityGraph:
    n = adjacency.rows
    g = ModalityGraph(
        n_nodes=n,
        adjacency=adjacency,
        features=np.ascontiguousarray(features, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        train_mask=empty_masks(n),
        val_mask=empty_masks(n),
        test_mask=empty_masks(n),
    )
    g.validate()
    return g


def degrees(adjacency: SparseMatrix) -> np.ndarray:
    return np.asarray(adjacency.to_scipy().sum(axis=1)).ravel()


def normalized_laplacian(g: ModalityGraph) -> SparseMatrix:
    """L = I - D^{-1/2} A D^{-1/2}; rows of isolated nodes are all zero."""
    a = g.adjacency
    if a.nnz and a.values.min() < 0:
        raise DataError("negative edge weight")
    d = degrees(a)
    dinv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    coo = a.to_scipy().tocoo()
    off_r = coo.row
    off_c = coo.col
    off_v = -coo.data * dinv[off_r] * dinv[off_c]
    diag_idx = np.nonzero(d > 0)[0]
    r = np.concatenate([off_r, diag_idx])
    c = np.concatenate([off_c, diag_idx])
    v = np.concatenate([off_v, np.ones(len(diag_idx))])
    return from_coo(a.rows, a.cols, r, c, v)


def unnormalized_laplacian(adjacency: SparseMatrix) -> SparseMatrix:
    """D - A, the quadratic form behind the within-modality regularizer."""
    d = degrees(adjacency)
    coo = adjacency.to_scipy().tocoo()
    idx = np.arange(adjacency.rows)
    r = np.concatenate([coo.row, idx])
    c = np.concatenate([coo.col, idx])
    v = np.concatenate([-coo.data, d])
    return from_coo(adjacency.rows, adjacency.cols, r, c, v)


def _check_symmetric(s: SparseMatrix, tol: float = 1e-10) -> None:
    st = transpose_sparse(s)
    diff = (s.to_scipy() - st.to_scipy())
    if diff.nnz and np.max(np.abs(diff.data)) > tol:
        raise DataError("matrix is not symmetric")


def estimate_lambda_max(L: SparseMatrix, max_iter: int = 200,
                        tol: float = 1e-7) -> float:
    """Power-iteration upper estimate of the largest eigenvalue.

    Deterministic all-ones start; the ones vector sits in the kernel of the
    normalized Laplacian of any regular graph, so a degenerate iterate
    triggers one restart from an alternating-sign vector. Returns the
    Rayleigh value inflated by the residual norm, capped at 2.0; falls
    back to 2.0 on non-convergence and to 0.0 for the exactly-zero matrix.
    """
    if L.rows != L.cols:
        raise DataError("estimate_lambda_max needs a square matrix")
    _check_symmetric(L)
    n = L.rows
    if L.nnz == 0 or np.max(np.abs(L.values)) == 0.0:
        return 0.0
    m = L.to_scipy()

    def run(x):
        lam_prev = None
        x = x / np.linalg.norm(x)
        for _ in range(max_iter):
            y = m @ x
            ny = np.linalg.norm(y)
            if ny < 1e-10:  # kernel up to roundoff: the start was degenerate
                return None
            x = y / ny
            lam = float(x @ (m @ x))
            if lam_prev is not None and abs(lam - lam_prev) < tol:
                resid = float(np.linalg.norm(m @ x - lam * x))
                return min(LAMBDA_MAX_BOUND, abs(lam) + resid)
            lam_prev = lam
        return LAMBDA_MAX_BOUND  # no convergence within the cap

    est = run(np.ones(n))
    if est is None:
        alt = np.ones(n)
        alt[1::2] = -1.0
        est = run(alt)
    return LAMBDA_MAX_BOUND if est is None else est


def rescale_laplacian(L: SparseMatrix, lambda_max: float) -> SparseMatrix:
    """(2 / lambda_max) L - I."""
    if lambda_max <= 0:
        raise ParameterError(f"lambda_max must be positive, got {lambda_max}")
    coo = L.to_scipy().tocoo()
    idx = np.arange(L.rows)
    r = np.concatenate([coo.row, idx])
    c = np.concatenate([coo.col, idx])
    v = np.concatenate([coo.data * (2.0 / lambda_max), -np.ones(L.rows)])
    return from_coo(L.rows, L.cols, r, c, v)


@dataclass
class SpectralPrep:
    """Laplacian, the lambda_max used, and the rescaled Laplacian."""

    laplacian: SparseMatrix
    lambda_max: float
    rescaled: SparseMatrix


def spectral_prep(g: ModalityGraph, use_estimate: bool = False) -> SpectralPrep:
    """Prepare L and its rescaling for wavelet construction.

    By default the rescaling uses the universal bound 2.0 so that the
    Chebyshev kernel e^{-s(x+1)} coincides with e^{-s*lambda} on the true
    spectrum; `use_estimate` switches to the power-iteration estimate.
    """
    L = normalized_laplacian(g)
    lam = LAMBDA_MAX_BOUND
    if use_estimate:
        est = estimate_lambda_max(L)
        lam = est if est > 0 else LAMBDA_MAX_BOUND
    return SpectralPrep(laplacian=L, lambda_max=lam,
                        rescaled=rescale_laplacian(L, lam))


def knn_graph(features: DenseMatrix, k: int) -> SparseMatrix:
    """Symmetric Gaussian-weighted k-nearest-neighbour graph.

    Edge (i, j) exists iff j is among i's k nearest (Euclidean) or vice
    versa; weight exp(-d^2 / sigma^2) with sigma the mean kNN distance.
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    n = x.shape[0]
    if not (1 <= k < n):
        raise ParameterError(f"knn_graph needs 1 <= k < n, got k={k}, n={n}")
    sq = np.sum(x * x, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    np.fill_diagonal(d2, np.inf)
    nbr = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = nbr.ravel()
    nbr_d2 = d2[rows, cols]
    sigma = float(np.mean(np.sqrt(nbr_d2)))
    if sigma > 0:
        w = np.exp(-nbr_d2 / (sigma * sigma))
    else:
        w = np.ones_like(nbr_d2)  # all duplicate points
    # union-symmetrise: keep the weight once per unordered pair
    pair_r = np.concatenate([rows, cols])
    pair_c = np.concatenate([cols, rows])
    pair_w = np.concatenate([w, w])
    order = np.lexsort((pair_c, pair_r))
    pr, pc, pw = pair_r[order], pair_c[order], pair_w[order]
    keep = np.ones(len(pr), dtype=bool)
    keep[1:] = (pr[1:] != pr[:-1]) | (pc[1:] != pc[:-1])
    return from_coo(n, n, pr[keep], pc[keep], pw[keep])


def gcn_propagation(g: ModalityGraph) -> SparseMatrix:
    """D~^{-1/2} (A + I) D~^{-1/2}, the baseline propagation operator."""
    a = g.adjacency.to_scipy()
    n = g.n_nodes
    coo = a.tocoo()
    idx = np.arange(n)
    r = np.concatenate([coo.row, idx])
    c = np.concatenate([coo.col, idx])
    v = np.concatenate([coo.data, np.ones(n)])
    d = np.zeros(n)
    np.add.at(d, r, v)
    dinv = 1.0 / np.sqrt(d)
    return from_coo(n, n, r, c, v * dinv[r] * dinv[c])
