import itertools
import math

import numpy as np
import pytest

from mtt_fisher import _kernels_py, kernels
from mtt_fisher.kalman import kalman_loglik_score
from mtt_fisher.rngstream import rng_stream

try:
    from mtt_fisher import _kernels_c
except ImportError:
    _kernels_c = None

needs_compiled = pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")


def brute_permanent_gradient(g, gd):
    k = g.shape[0]
    perm, dperm = 0.0, 0.0
    for sigma in itertools.permutations(range(k)):
        p = 1.0
        for i, j in enumerate(sigma):
            p *= g[i, j]
        perm += p
        for i, j in enumerate(sigma):
            q = gd[i, j]
            for i2, j2 in enumerate(sigma):
                if i2 != i:
                    q *= g[i2, j2]
            dperm += q
    return perm, dperm


class TestPermanentKernel:
    @pytest.mark.parametrize("k", range(1, 8))
    def test_against_brute_force(self, k, rng_factory):
        rng = rng_factory(80, k)
        diff = rng.standard_normal((10, k, k))
        g = np.exp(-0.5 * diff**2)
        gd = g * diff
        log_perm, score = kernels.batch_permanent_gradient(g, gd)
        for b in range(10):
            perm, dperm = brute_permanent_gradient(g[b], gd[b])
            assert log_perm[b] == pytest.approx(math.log(perm), rel=1e-10)
            assert score[b] == pytest.approx(dperm / perm, rel=1e-10, abs=1e-12)

    def test_zero_row_gives_zero_permanent(self):
        g = np.ones((1, 3, 3))
        g[0, 1] = 0.0
        log_perm, score = kernels.batch_permanent_gradient(g, np.zeros_like(g))
        assert log_perm[0] == -np.inf
        assert np.isnan(score[0])

    def test_row_scaling_is_transparent(self, rng_factory):
        rng = rng_factory(81)
        g = rng.random((5, 4, 4)) * 1e-200  # would underflow without scaling
        gd = rng.standard_normal((5, 4, 4)) * g
        log_perm, score = kernels.batch_permanent_gradient(g, gd)
        log_perm2, score2 = kernels.batch_permanent_gradient(g * 1e200, gd * 1e200)
        assert np.allclose(log_perm - math.log(1e-200) * 4, log_perm2, atol=1e-8)
        assert np.allclose(score, score2, rtol=1e-10)

    @needs_compiled
    def test_backends_agree(self, rng_factory):
        rng = rng_factory(82)
        diff = rng.standard_normal((64, 6, 6))
        g = np.exp(-0.5 * diff**2)
        g[0, 2] = 0.0  # exercise the zero-row branch in both
        gd = g * diff
        lp_a, sc_a = _kernels_py.batch_permanent_gradient(g, gd)
        lp_b, sc_b = _kernels_c.batch_permanent_gradient(g, gd)
        assert np.allclose(lp_a, lp_b, equal_nan=True, atol=1e-12)
        assert np.allclose(sc_a, sc_b, equal_nan=True, atol=1e-12)


class TestParticleKernel:
    def _problem(self, seed, batch=64, n=40, p_d=0.5):
        rng = rng_stream(seed, 0)
        x = 0.1 * np.cumsum(rng.standard_normal((batch, n)), axis=1)
        y = x + rng.standard_normal((batch, n))
        det = rng.random((batch, n)) < p_d
        return y, det, rng

    @needs_compiled
    def test_backends_agree(self):
        y, det, rng = self._problem(83)
        noise = rng.standard_normal((y.shape[0], y.shape[1], 300))
        res_u = rng.random(y.shape)
        out_a = _kernels_py.pf_masked_score(y, det, 0.0, 0.1, 1.0, 0, 1.0, noise, res_u)
        out_b = _kernels_c.pf_masked_score(y, det, 0.0, 0.1, 1.0, 0, 1.0, noise, res_u)
        assert np.allclose(out_a[0], out_b[0], atol=1e-9)
        assert np.allclose(out_a[1], out_b[1], atol=1e-9)

    @pytest.mark.parametrize("kind,theta", [(0, 1.0), (1, 0.3)])
    def test_matches_exact_filter(self, kind, theta):
        y, det, rng = self._problem(84 + kind, batch=150)
        noise = rng.standard_normal((y.shape[0], y.shape[1], 400))
        res_u = rng.random(y.shape)
        score, loglik = kernels.pf_masked_score(y, det, 0.0, 0.1, theta, kind, 1.0, noise, res_u)
        ll_exact, s_exact = kalman_loglik_score(
            y, det, 0.0, 0.01, theta, kind="variance" if kind == 0 else "location"
        )
        # per-sequence particle noise is a few percent; group means must agree
        assert abs((loglik - ll_exact).mean()) < 3 * (loglik - ll_exact).std(ddof=1) / math.sqrt(150) + 0.02
        assert abs((score - s_exact).mean()) < 3 * (score - s_exact).std(ddof=1) / math.sqrt(150) + 0.03

    def test_split_product_is_unbiased_for_squared_score(self):
        y, det, rng = self._problem(86, batch=300)
        _, s_exact = kalman_loglik_score(y, det, 0.0, 0.01, 1.0, kind="variance")
        halves = []
        for _ in range(2):
            noise = rng.standard_normal((y.shape[0], y.shape[1], 250))
            res_u = rng.random(y.shape)
            s, _ = kernels.pf_masked_score(y, det, 0.0, 0.1, 1.0, 0, 1.0, noise, res_u)
            halves.append(s)
        gap = halves[0] * halves[1] - s_exact**2
        se = gap.std(ddof=1) / math.sqrt(gap.size)
        assert abs(gap.mean()) < 3 * se

    def test_resampling_occurs_and_loglik_finite(self):
        y, det, rng = self._problem(87, batch=8, n=100, p_d=1.0)
        noise = rng.standard_normal((8, 100, 200))
        res_u = rng.random((8, 100))
        score, loglik = kernels.pf_masked_score(y, det, 0.0, 0.1, 1.0, 0, 1.0, noise, res_u)
        assert np.all(np.isfinite(score)) and np.all(np.isfinite(loglik))
