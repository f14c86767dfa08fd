import time

import mpmath
import numpy as np
import pytest
from scipy.stats import spearmanr

import wavegraph as wg
from wavegraph.errors import DataError, ParameterError, ScopeError
from wavegraph.wavelets import chebyshev_coefficients, dense_wavelet_inverse_oracle

from conftest import er_graph, path_graph


def rescaled_of(g):
    return wg.spectral_prep(g).rescaled


class TestBesselJ:
    def test_j0_at_zero(self):
        assert wg.bessel_j(0, 0.0) == 1.0

    def test_j1_at_zero(self):
        assert wg.bessel_j(1, 0.0) == 0.0

    def test_j0_at_one_reference_value(self):
        assert wg.bessel_j(0, 1.0) == pytest.approx(0.76519768655796655, rel=1e-12)

    @pytest.mark.parametrize("order", [0, 1, 2, 5, 10, 25, 60])
    @pytest.mark.parametrize("x", [-10.0, -1.3, -0.4, 0.7, 3.0, 10.0])
    def test_against_high_precision_oracle(self, order, x):
        expected = float(mpmath.besselj(order, mpmath.mpf(x)))
        got = wg.bessel_j(order, x)
        if abs(expected) > 1e-280:
            assert got == pytest.approx(expected, rel=1e-11)
        else:
            assert abs(got - expected) < 1e-280

    def test_negative_order_rejected(self):
        with pytest.raises(ParameterError):
            wg.bessel_j(-1, 1.0)


class TestChebyshevWavelet:
    def test_scale_zero_is_identity(self):
        g = er_graph(10, 0.4, seed=1)
        basis = wg.chebyshev_wavelet(rescaled_of(g), 0.0, 25, 1e-4)
        eye = np.eye(10)
        assert np.array_equal(wg.densify(basis.psi), eye)
        assert np.array_equal(wg.densify(basis.psi_inv), eye)

    def test_er20_matches_dense_oracle(self):
        g = er_graph(20, 0.3, seed=7)
        prep = wg.spectral_prep(g)
        basis = wg.chebyshev_wavelet(prep.rescaled, 0.7, 40, 0.0)
        oracle = wg.dense_wavelet_oracle(prep.laplacian, 0.7)
        assert np.max(np.abs(wg.densify(basis.psi) - oracle)) <= 1e-6
        inv_oracle = dense_wavelet_inverse_oracle(prep.laplacian, 0.7)
        assert np.max(np.abs(wg.densify(basis.psi_inv) - inv_oracle)) <= 1e-6

    def test_threshold_shrinks_and_filters(self):
        g = er_graph(20, 0.3, seed=7)
        rescaled = rescaled_of(g)
        full = wg.chebyshev_wavelet(rescaled, 0.7, 40, 0.0)
        cut = wg.chebyshev_wavelet(rescaled, 0.7, 40, 1e-4)
        assert cut.psi.nnz <= full.psi.nnz
        assert np.min(np.abs(cut.psi.values)) >= 1e-4

    def test_order_zero_rejected(self):
        g = er_graph(6, 0.5, seed=2)
        with pytest.raises(ParameterError):
            wg.chebyshev_wavelet(rescaled_of(g), 0.5, 0, 0.0)

    def test_unrescaled_laplacian_rejected(self):
        g = er_graph(10, 0.4, seed=3)
        lap = wg.normalized_laplacian(g)  # spectral radius ~2, not rescaled
        with pytest.raises(DataError):
            wg.chebyshev_wavelet(lap, 0.5, 20, 0.0)

    @pytest.mark.parametrize("s", [0.3, 0.7, 1.0])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_oracle_agreement_family(self, s, seed):
        n = int(np.random.default_rng(seed).integers(8, 50))
        g = er_graph(n, 0.35, seed=seed + 100)
        prep = wg.spectral_prep(g)
        basis = wg.chebyshev_wavelet(prep.rescaled, s, 40, 0.0)
        oracle = wg.dense_wavelet_oracle(prep.laplacian, s)
        err = np.max(np.abs(wg.densify(basis.psi) - oracle))
        assert err <= 1e-3
        if s <= 0.7:
            assert err <= 1e-6

    @pytest.mark.parametrize("s", [0.3, 0.7, 1.0])
    def test_inverse_property(self, s):
        g = er_graph(25, 0.3, seed=50)
        basis = wg.chebyshev_wavelet(rescaled_of(g), s, 40, 0.0)
        prod = wg.densify(basis.psi) @ wg.densify(basis.psi_inv)
        assert np.max(np.abs(prod - np.eye(25))) <= 1e-3

    def test_locality_on_path_graph(self):
        n = 20
        adj = path_graph(n)
        g = wg.make_graph(adj, np.zeros((n, 1)), np.zeros(n, dtype=np.int64))
        basis = wg.chebyshev_wavelet(rescaled_of(g), 0.3, 40, 0.0)
        psi = wg.densify(basis.psi)
        mags, dists = [], []
        for i in range(n):
            for j in range(n):
                mags.append(abs(psi[i, j]))
                dists.append(abs(i - j))
        rho, _ = spearmanr(mags, dists)
        assert rho < -0.9

    def test_bessel_j_mode_reproduces_printed_formula(self):
        s, q = 0.7, 12
        coeffs = chebyshev_coefficients(s, q, sign=-1.0, method="bessel_j")
        expected = [2.0 * np.exp(-s) * wg.bessel_j(i, -s) for i in range(q + 1)]
        assert np.allclose(coeffs, expected, rtol=0, atol=1e-15)
        inv = chebyshev_coefficients(s, q, sign=+1.0, method="bessel_j")
        expected_inv = [2.0 * np.exp(s) * wg.bessel_j(i, s) for i in range(q + 1)]
        assert np.allclose(inv, expected_inv, rtol=0, atol=1e-15)

    def test_quadrature_beats_bessel_j_against_oracle(self):
        # the printed closed form does not reproduce the heat kernel; the
        # quadrature route is the default for exactly this reason
        g = er_graph(16, 0.4, seed=9)
        prep = wg.spectral_prep(g)
        oracle = wg.dense_wavelet_oracle(prep.laplacian, 0.7)
        quad = wg.chebyshev_wavelet(prep.rescaled, 0.7, 40, 0.0, "quadrature")
        printed = wg.chebyshev_wavelet(prep.rescaled, 0.7, 40, 0.0, "bessel_j")
        err_quad = np.max(np.abs(wg.densify(quad.psi) - oracle))
        err_printed = np.max(np.abs(wg.densify(printed.psi) - oracle))
        assert err_quad <= 1e-6
        assert err_printed > 1e-2


class TestDenseWaveletOracle:
    def test_scale_zero_identity(self):
        g = er_graph(8, 0.4, seed=4)
        lap = wg.normalized_laplacian(g)
        assert np.allclose(wg.dense_wavelet_oracle(lap, 0.0), np.eye(8),
                           atol=1e-12)

    def test_one_by_one(self):
        lap = wg.from_coo(1, 1, [], [], [])
        assert wg.dense_wavelet_oracle(lap, 1.0).tolist() == [[1.0]]

    def test_two_node_hand_eigendecomposition(self):
        lap = wg.sparsify(np.array([[1.0, -1.0], [-1.0, 1.0]]), 0.0)
        psi = wg.dense_wavelet_oracle(lap, 1.0)
        a = (1 + np.exp(-2.0)) / 2
        b = (1 - np.exp(-2.0)) / 2
        assert np.allclose(psi, [[a, b], [b, a]], atol=1e-12)

    def test_size_cap(self):
        big = wg.identity(201)
        with pytest.raises(ScopeError):
            wg.dense_wavelet_oracle(big, 0.5)


def test_cost_scaling_in_edges_and_order():
    # wall time should scale ~linearly in nnz and in the polynomial order
    n = 700
    rng = np.random.default_rng(0)

    def er_rescaled(p):
        upper = np.triu((rng.random((n, n)) < p).astype(float), 1)
        adj = wg.sparsify(upper + upper.T, 0.0)
        g = wg.make_graph(adj, np.zeros((n, 1)), np.zeros(n, dtype=np.int64))
        return wg.spectral_prep(g).rescaled

    sparse_l = er_rescaled(0.01)
    dense_l = er_rescaled(0.02)

    def timed(lap, q):
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            wg.chebyshev_wavelet(lap, 0.5, q, 1e-4)
            best = min(best, time.perf_counter() - t0)
        return best

    t_sparse = timed(sparse_l, 30)
    t_dense = timed(dense_l, 30)
    assert t_dense / t_sparse <= 3.0
    t_q = timed(sparse_l, 60)
    assert t_q / t_sparse <= 3.0
