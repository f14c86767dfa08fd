import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import wavegraph as wg
from wavegraph.errors import ParameterError, ShapeError

from oracles import naive_matmul


def random_sparse(n, m, density, seed):
    rng = np.random.default_rng(seed)
    dense = rng.normal(size=(n, m)) * (rng.random((n, m)) < density)
    return wg.sparsify(dense, 0.0), dense


class TestSpmm:
    def test_identity(self):
        d = np.arange(12.0).reshape(3, 4)
        assert np.array_equal(wg.spmm(wg.identity(3), d), d)

    def test_zero_matrix(self):
        z = wg.from_coo(2, 2, [], [], [])
        d = np.ones((2, 5))
        assert np.array_equal(wg.spmm(z, d), np.zeros((2, 5)))

    def test_against_densify_oracle(self):
        s, dense = random_sparse(5, 5, 0.4, seed=1)
        d = np.random.default_rng(2).normal(size=(5, 3))
        assert np.max(np.abs(wg.spmm(s, d) - dense @ d)) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            wg.spmm(wg.identity(3), np.ones((4, 2)))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_product_random(self, seed):
        n = int(np.random.default_rng(seed).integers(2, 50))
        s, dense = random_sparse(n, n, 0.5, seed=seed + 10)
        d = np.random.default_rng(seed + 20).normal(size=(n, 7))
        assert np.max(np.abs(wg.spmm(s, d) - wg.dense_matmul(dense, d))) <= 1e-12


class TestDenseMatmul:
    def test_identity(self):
        a = np.random.default_rng(0).normal(size=(3, 3))
        assert np.array_equal(wg.dense_matmul(a, np.eye(3)), a)

    def test_hand_case(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[0.0], [1.0]])
        assert np.array_equal(wg.dense_matmul(a, b), [[2.0], [4.0]])

    def test_against_naive_loop(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        assert np.max(np.abs(wg.dense_matmul(a, b) - naive_matmul(a, b))) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            wg.dense_matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestSparsify:
    def test_threshold_drops_small(self):
        d = np.array([[1e-5, 0.5], [0.2, -1e-6]])
        s = wg.sparsify(d, 1e-4)
        assert s.nnz == 2
        assert sorted(s.values.tolist()) == [0.2, 0.5]

    def test_zero_threshold_keeps_all_nonzero(self):
        d = np.array([[0.0, 1e-300], [-2.0, 3.0]])
        s = wg.sparsify(d, 0.0)
        assert s.nnz == 3

    def test_count_oracle(self):
        rng = np.random.default_rng(4)
        d = rng.normal(size=(10, 10))
        s = wg.sparsify(d, 0.3)
        assert s.nnz == int(np.sum(np.abs(d) >= 0.3))

    def test_negative_threshold_rejected(self):
        with pytest.raises(ParameterError):
            wg.sparsify(np.ones((2, 2)), -1.0)

    def test_kept_values_exact(self):
        d = np.array([[0.25, -0.75]])
        s = wg.sparsify(d, 0.5)
        assert s.values.tolist() == [-0.75]


class TestTransposeSparse:
    def test_symmetric_unchanged(self):
        d = np.array([[0.0, 1.0], [1.0, 2.0]])
        s = wg.sparsify(d, 0.0)
        t = wg.transpose_sparse(s)
        assert np.array_equal(wg.densify(t), d)

    def test_single_entry(self):
        s = wg.from_coo(3, 3, [0], [2], [5.0])
        t = wg.transpose_sparse(s)
        expected = np.zeros((3, 3)); expected[2, 0] = 5.0
        assert np.array_equal(wg.densify(t), expected)

    def test_double_transpose_roundtrip(self):
        s, dense = random_sparse(6, 4, 0.4, seed=9)
        tt = wg.transpose_sparse(wg.transpose_sparse(s))
        assert np.array_equal(wg.densify(tt), dense)


class TestConstruction:
    def test_duplicates_are_summed(self):
        s = wg.from_coo(2, 2, [0, 0, 1], [1, 1, 0], [1.0, 2.0, 4.0])
        assert wg.densify(s).tolist() == [[0.0, 3.0], [4.0, 0.0]]

    def test_csr_invariants_hold(self):
        s, _ = random_sparse(12, 7, 0.5, seed=11)
        s.check_invariants()
        wg.transpose_sparse(s).check_invariants()

    def test_sparsify_densify_roundtrip(self):
        s, dense = random_sparse(8, 8, 0.4, seed=12)
        rt = wg.sparsify(wg.densify(s), 0.0)
        assert np.array_equal(wg.densify(rt), dense)
        assert rt.nnz == s.nnz


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=10**6))
def test_property_roundtrip_and_involution(n, seed):
    rng = np.random.default_rng(seed)
    dense = rng.normal(size=(n, n)) * (rng.random((n, n)) < 0.5)
    s = wg.sparsify(dense, 0.0)
    assert np.array_equal(wg.densify(wg.transpose_sparse(wg.transpose_sparse(s))),
                          dense)
    assert np.array_equal(wg.densify(wg.sparsify(wg.densify(s), 0.0)), dense)
