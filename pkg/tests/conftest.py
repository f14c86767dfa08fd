import numpy as np
import pytest

import wavegraph as wg


def random_symmetric_adjacency(n: int, p: float, seed: int) -> wg.SparseMatrix:
    """Erdos-Renyi adjacency with unit weights, zero diagonal."""
    rng = np.random.default_rng(seed)
    upper = np.triu((rng.random((n, n)) < p).astype(float), 1)
    return wg.sparsify(upper + upper.T, 0.0)


def er_graph(n: int, p: float, seed: int, d: int = 4,
             n_classes: int = 2) -> wg.ModalityGraph:
    rng = np.random.default_rng(seed + 1000)
    adj = random_symmetric_adjacency(n, p, seed)
    feats = rng.normal(size=(n, d))
    labels = rng.integers(0, n_classes, size=n).astype(np.int64)
    return wg.make_graph(adj, feats, labels)


def with_simple_masks(g: wg.ModalityGraph, n_train: int, n_val: int,
                      n_test: int) -> wg.ModalityGraph:
    n = g.n_nodes
    assert n_train + n_val + n_test <= n
    train = np.zeros(n, dtype=bool); train[:n_train] = True
    val = np.zeros(n, dtype=bool); val[n_train:n_train + n_val] = True
    test = np.zeros(n, dtype=bool); test[n_train + n_val:n_train + n_val + n_test] = True
    return g.with_masks(train, val, test)


def path_graph(n: int) -> wg.SparseMatrix:
    r = list(range(n - 1)) + list(range(1, n))
    c = list(range(1, n)) + list(range(n - 1))
    return wg.from_coo(n, n, r, c, np.ones(2 * (n - 1)))


def two_modality_toy(seed: int = 0, n: int = 8):
    """Two small labeled modalities with consistent class alphabets."""
    graphs = []
    for m in range(2):
        g = er_graph(n, 0.45, seed=seed + 7 * m, d=3 + m, n_classes=2)
        graphs.append(with_simple_masks(g, 3, 2, n - 5))
    return graphs


@pytest.fixture
def rng():
    return np.random.default_rng(0)
