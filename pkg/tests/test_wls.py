import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratiopop import FrequencyTable, ratio_points, wlrm_estimate
from ratiopop.freq_model import RatioPoints
from ratiopop.wls import (
    Design,
    WeightScheme,
    WLSError,
    covariance_diagonal,
    covariance_full,
    design_matrix,
    solve_tridiagonal,
    weighted_normal_solve,
    wls_fit,
)

SCHEMES = list(WeightScheme)
freq_lists = st.lists(st.integers(1, 5000), min_size=4, max_size=11)


def dense_covariance(t, pts):
    """Delta-method covariance built entry by entry, independent of the solver."""
    k = len(pts)
    V = np.zeros((k, k))
    for i, x in enumerate(pts.x):
        V[i, i] = 1 / t.f(x) + 1 / t.f(x + 1)
        for j, z in enumerate(pts.x):
            if z == x + 1:
                V[i, j] = V[j, i] = -1 / t.f(x + 1)
    return V


def dense_gls(t, pts, scheme, design=Design.LINEAR):
    X = design_matrix(pts.x, design)
    y = pts.y - (np.log(pts.x + 1.0) if design is Design.HYPERBOLIC else 0)
    if scheme is WeightScheme.IDENTITY:
        W = np.eye(len(pts))
    else:
        V = dense_covariance(t, pts)
        if scheme is WeightScheme.DIAGONAL:
            V = np.diag(np.diag(V))
        W = np.linalg.inv(V)
    return np.linalg.solve(X.T @ W @ X, X.T @ W @ y)


class TestCovariance:
    def test_full_three_cell(self, three_cell):
        V = covariance_full(three_cell, ratio_points(three_cell, 3))
        np.testing.assert_allclose(V, [[0.03, -0.02], [-0.02, 0.12]], atol=1e-15)

    def test_diagonal_three_cell(self, three_cell):
        V = covariance_diagonal(three_cell, ratio_points(three_cell, 3))
        np.testing.assert_allclose(V, np.diag([0.03, 0.12]), atol=1e-15)

    def test_single_point(self, three_cell):
        V = covariance_full(three_cell, ratio_points(three_cell, 2))
        np.testing.assert_allclose(V, [[1 / 100 + 1 / 50]])

    def test_meth_diagonal(self, datasets):
        V = covariance_diagonal(datasets["meth"], ratio_points(datasets["meth"], 10))
        assert V.shape == (9, 9)
        assert V[0, 0] == pytest.approx(1 / 3114 + 1 / 163, rel=1e-14)

    def test_gap_breaks_coupling(self):
        t = FrequencyTable({1: 40, 2: 20, 3: 10, 5: 4, 6: 2, 7: 1})
        pts = ratio_points(t, 7)
        assert list(pts.x) == [1, 2, 5, 6]
        V = covariance_full(t, pts)
        assert V[1, 2] == 0 and V[2, 1] == 0
        assert V[0, 1] == pytest.approx(-1 / 20)
        assert V[2, 3] == pytest.approx(-1 / 2)

    def test_zero_frequency_rejected(self):
        t = FrequencyTable({1: 4, 2: 2, 3: 1})
        bogus = RatioPoints(np.array([3]), np.array([0.0]), 4)
        with pytest.raises(WLSError):
            covariance_full(t, bogus)

    @given(freq_lists, st.floats(0.01, 100))
    def test_scaling(self, fs, c):
        t = FrequencyTable(dict(enumerate(fs, start=1)))
        pts = ratio_points(t, len(fs))
        np.testing.assert_allclose(covariance_full(t.scaled(c), pts),
                                   covariance_full(t, pts) / c, rtol=1e-12)

    @given(freq_lists)
    def test_symmetric_positive_definite(self, fs):
        t = FrequencyTable(dict(enumerate(fs, start=1)))
        V = covariance_full(t, ratio_points(t, len(fs)))
        np.testing.assert_array_equal(V, V.T)
        np.linalg.cholesky(V)


class TestSolvers:
    @settings(max_examples=100)
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_thomas_matches_dense(self, k, seed):
        rng = np.random.default_rng(seed)
        off = -rng.uniform(0.01, 1, k - 1)
        diag = rng.uniform(0.1, 1, k) + np.abs(np.r_[off, 0]) + np.abs(np.r_[0, off])
        rhs = rng.normal(size=(k, 3))
        A = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        np.testing.assert_allclose(solve_tridiagonal(off, diag, off, rhs),
                                   np.linalg.solve(A, rhs), rtol=1e-10, atol=1e-12)

    @settings(max_examples=100)
    @given(st.integers(0, 2**32 - 1), st.integers(4, 11), st.sampled_from(SCHEMES),
           st.sampled_from(list(Design)))
    def test_fit_matches_dense_oracle(self, seed, cells, scheme, design):
        rng = np.random.default_rng(seed)
        t = FrequencyTable({x: int(rng.integers(1, 2000)) for x in range(1, cells + 1)})
        pts = ratio_points(t, cells)
        fit = wls_fit(pts, t, scheme, design)
        ref = dense_gls(t, pts, scheme, design)
        np.testing.assert_allclose(fit.params, ref, rtol=1e-10, atol=1e-12)

    @given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1e6))
    def test_weight_scalar_invariance(self, seed, c):
        rng = np.random.default_rng(seed)
        k = 7
        X = design_matrix(np.arange(1, k + 1), Design.LINEAR)
        y = rng.normal(size=k)
        diag = rng.uniform(1, 2, k)
        off = -rng.uniform(0, 0.4, k - 1)
        b1 = weighted_normal_solve(X, y, diag, off)[0]
        b2 = weighted_normal_solve(X, y, c * diag, c * off)[0]
        np.testing.assert_allclose(b2, b1, rtol=1e-10, atol=1e-12)

    def test_singular_normal_equations(self):
        X = design_matrix(np.array([2, 2]), Design.LINEAR)
        with pytest.raises(WLSError):
            weighted_normal_solve(X, np.array([0.0, 1.0]), np.ones(2))


class TestFit:
    def test_two_point_exact(self, three_cell):
        pts = ratio_points(three_cell, 3)
        np.testing.assert_allclose(pts.y, [0.0, math.log(0.6)], atol=1e-15)
        for scheme in SCHEMES:
            fit = wls_fit(pts, three_cell, scheme)
            assert fit.gamma_hat == pytest.approx(0.5108256, abs=1e-7)
            assert fit.delta_hat == pytest.approx(-0.5108256, abs=1e-7)
            np.testing.assert_array_equal(fit.residuals, [0.0, 0.0])
            assert fit.dispersion == 1.0

    @given(st.integers(1, 1000), st.integers(1, 1000), st.integers(1, 1000))
    def test_two_point_scheme_independence(self, a, b, c):
        t = FrequencyTable({1: a, 2: b, 3: c})
        pts = ratio_points(t, 3)
        fits = [wls_fit(pts, t, s).params for s in SCHEMES]
        for f in fits[1:]:
            np.testing.assert_allclose(f, fits[0], rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_poisson_shape_zero_line(self, poisson_shape, scheme):
        fit = wls_fit(ratio_points(poisson_shape, 4), poisson_shape, scheme)
        assert abs(fit.gamma_hat) < 1e-14 and abs(fit.delta_hat) < 1e-14

    @given(freq_lists, st.floats(0.01, 100), st.sampled_from(SCHEMES))
    def test_frequency_scale_invariance(self, fs, c, scheme):
        t = FrequencyTable(dict(enumerate(fs, start=1)))
        pts = ratio_points(t, len(fs))
        a = wls_fit(pts, t, scheme)
        b = wls_fit(ratio_points(t.scaled(c), len(fs)), t.scaled(c), scheme)
        np.testing.assert_allclose(b.params, a.params, rtol=1e-10, atol=1e-12)

    def test_dispersion_scaling(self, datasets):
        t = datasets["scrapie"]
        pts = ratio_points(t, 8)
        fit = wls_fit(pts, t, WeightScheme.DIAGONAL)
        w = 1 / np.diag(covariance_diagonal(t, pts))
        expected = float(np.sum(w * fit.residuals ** 2)) / (len(pts) - 2)
        assert fit.dispersion == pytest.approx(expected, rel=1e-12)
        np.testing.assert_allclose(fit.cov_params, fit.cov_unscaled * expected, rtol=1e-12)

    def test_covariance_symmetric_nonnegative(self, datasets):
        for t in datasets.values():
            m = min(t.max_count, 10)
            pts = ratio_points(t, m)
            if len(pts) < 2:
                continue
            for scheme in SCHEMES:
                cov = wls_fit(pts, t, scheme).cov_params
                np.testing.assert_allclose(cov, cov.T)
                assert np.all(np.diag(cov) >= 0)

    def test_too_few_points(self):
        t = FrequencyTable({1: 5, 2: 3})
        with pytest.raises(WLSError):
            wls_fit(ratio_points(t, 2), t)

    def test_butterfly_intercept(self, datasets):
        res = wlrm_estimate(datasets["butterfly"], 8, WeightScheme.DIAGONAL)
        assert round(res.f0_hat) == 126

    def test_hyperbolic_predict_includes_offset(self, three_cell):
        fit = wls_fit(ratio_points(three_cell, 3), three_cell, design=Design.HYPERBOLIC)
        np.testing.assert_allclose(fit.predict(np.array([1, 2])), ratio_points(three_cell, 3).y,
                                   atol=1e-12)

    def test_scheme_aliases(self):
        assert WeightScheme.parse("diagonal") is WeightScheme.DIAGONAL
        assert WeightScheme.parse("full") is WeightScheme.FULL
        with pytest.raises(ValueError):
            WeightScheme.parse("bogus")
