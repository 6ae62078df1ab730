import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from zibeta.betadist import (
    BetaMS,
    beta_cdf,
    beta_log_density,
    extended_beta_cdf,
    extended_beta_log_density,
    inverse_reparam,
    link_log_inv,
    link_logit_inv,
    reparam,
    sample_beta,
    sample_beta_truncated,
)
from zibeta.errors import DegenerateTruncationError, ParameterDomainError

mus = st.floats(0.02, 0.98)
psis = st.floats(0.3, 60.0)


def quad_cdf(v, mu, psi):
    """Oracle: direct numerical integration of the Beta density."""
    a, b = mu * psi, (1 - mu) * psi
    f = lambda t: math.exp((a - 1) * math.log(t) + (b - 1) * math.log1p(-t) - special.betaln(a, b))
    return integrate.quad(f, 0, v, limit=200, epsabs=1e-13, epsrel=1e-12)[0]


class TestReparam:
    @pytest.mark.parametrize("mu,psi,ab", [(0.5, 2, (1, 1)), (0.25, 4, (1, 3)),
                                           (0.443, 1.547, (0.6853, 0.8617))])
    def test_examples(self, mu, psi, ab):
        assert np.allclose(reparam(mu, psi), ab, atol=5e-5)

    @given(mus, psis)
    def test_round_trip(self, mu, psi):
        m, p = inverse_reparam(*reparam(mu, psi))
        assert m == pytest.approx(mu, rel=1e-12) and p == pytest.approx(psi, rel=1e-12)

    @pytest.mark.parametrize("mu,psi", [(0.0, 1), (1.0, 1), (0.5, 0), (0.5, -1), (np.nan, 1)])
    def test_domain(self, mu, psi):
        with pytest.raises(ParameterDomainError):
            BetaMS(mu, psi)

    def test_from_shapes(self):
        p = BetaMS.from_shapes(2.0, 6.0)
        assert p.mu == 0.25 and p.psi == 8.0 and (p.alpha, p.beta) == (2.0, 6.0)


class TestDensity:
    def test_uniform(self):
        assert beta_log_density(0.3, BetaMS(0.5, 2)) == pytest.approx(0.0, abs=1e-14)

    def test_beta22(self):
        assert beta_log_density(0.5, BetaMS(0.5, 4)) == pytest.approx(math.log(1.5), rel=1e-13)

    def test_normalization_example(self):
        p = BetaMS(0.4, 3)
        tot = integrate.quad(lambda v: math.exp(beta_log_density(v, p)), 0, 1, limit=200)[0]
        assert abs(tot - 1) < 1e-8
        assert beta_log_density(0.2, p) == pytest.approx(stats.beta(1.2, 1.8).logpdf(0.2), rel=1e-12)

    @given(st.floats(0.001, 0.999), mus, psis)
    def test_matches_scipy(self, v, mu, psi):
        ref = stats.beta(mu * psi, (1 - mu) * psi).logpdf(v)
        assert beta_log_density(v, BetaMS(mu, psi)) == pytest.approx(ref, rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("v", [0.0, 1.0, 1.5, -0.1])
    def test_outside_support(self, v):
        with pytest.raises(ParameterDomainError):
            beta_log_density(v, BetaMS(0.3, 5))

    def test_broadcast(self):
        out = beta_log_density(np.array([0.2, 0.5]), BetaMS(np.array([0.3, 0.6]), 4.0))
        assert out.shape == (2,)


class TestCdf:
    @given(psis)
    def test_symmetry(self, psi):
        assert beta_cdf(0.5, BetaMS(0.5, psi)) == pytest.approx(0.5, abs=1e-12)

    def test_endpoints(self):
        p = BetaMS(0.3, 3)
        assert beta_cdf(1.0, p) == 1.0 and beta_cdf(0.0, p) == 0.0

    def test_quadrature_oracle(self):
        # [DERIVED] frozen value of the integrated density
        oracle = quad_cdf(0.5, 0.622, 1.547)
        assert oracle == pytest.approx(0.3452656, abs=1e-7)
        assert beta_cdf(0.5, BetaMS(0.622, 1.547)) == pytest.approx(oracle, abs=1e-10)

    # quad flags roundoff near integrable endpoint singularities; its value still meets the tolerance
    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    @settings(max_examples=60)
    @given(st.floats(0.01, 0.99), mus, psis)
    def test_matches_quadrature(self, v, mu, psi):
        assert beta_cdf(v, BetaMS(mu, psi)) == pytest.approx(quad_cdf(v, mu, psi), abs=1e-8)

    @given(mus, psis)
    def test_monotone(self, mu, psi):
        c = beta_cdf(np.linspace(0, 1, 41), BetaMS(mu, psi))
        assert np.all(np.diff(c) >= -1e-15)


class TestExtended:
    @pytest.mark.parametrize("w", [0.0, -0.5])
    def test_uniform(self, w):
        assert extended_beta_log_density(w, BetaMS(0.5, 2)) == pytest.approx(math.log(0.5))

    def test_identity(self):
        p = BetaMS(0.6, 3)
        assert extended_beta_log_density(0.4, p) == pytest.approx(beta_log_density(0.7, p) - math.log(2))

    def test_cdf_examples(self):
        assert extended_beta_cdf(0.0, BetaMS(0.5, 7)) == pytest.approx(0.5)
        assert extended_beta_cdf(-1.0, BetaMS(0.3, 2)) == 0.0
        assert extended_beta_cdf(1.0, BetaMS(0.3, 2)) == 1.0
        assert extended_beta_cdf(0.0, BetaMS(0.3, 2)) == pytest.approx(quad_cdf(0.5, 0.3, 2), abs=1e-10)

    @given(st.floats(-0.99, 0.99), mus, psis)
    def test_change_of_variables(self, w, mu, psi):
        p = BetaMS(mu, psi)
        assert extended_beta_cdf(w, p) == pytest.approx(beta_cdf((w + 1) / 2, p), abs=1e-14)


class TestSampling:
    def test_uniform_moments(self):
        v = sample_beta(np.random.default_rng(1), BetaMS(0.5, 2), size=100_000)
        assert abs(v.mean() - 0.5) < 0.01 and abs(v.var() - 1 / 12) < 0.005

    def test_mean(self):
        v = sample_beta(np.random.default_rng(2), BetaMS(0.25, 4), size=100_000)
        assert abs(v.mean() - 0.25) < 0.01

    def test_open_interval_tiny_shapes(self):
        v = sample_beta(np.random.default_rng(3), BetaMS(0.5, 0.002), size=2000)
        assert np.all((v > 0) & (v < 1))

    def test_truncated_uniform(self):
        v = sample_beta_truncated(np.random.default_rng(4), BetaMS(0.5, 2), 0.0, 0.5, size=100_000)
        assert np.all(v < 0.5) and np.all(v > 0) and abs(v.mean() - 0.25) < 0.01

    def test_truncated_vs_rejection(self):
        rng = np.random.default_rng(5)
        p = BetaMS(0.5, 4)
        v = sample_beta_truncated(rng, p, 0.0, 0.5, size=5000)
        ref = rng.beta(2, 2, size=30_000)
        ref = ref[ref < 0.5][:5000]
        assert stats.ks_2samp(v, ref).pvalue > 0.01

    @settings(max_examples=40)
    @given(mus, psis, st.floats(0.0, 0.8), st.floats(0.05, 0.2))
    def test_truncated_in_window(self, mu, psi, lo, width):
        hi = min(1.0, lo + width)
        p = BetaMS(mu, psi)
        try:
            v = sample_beta_truncated(np.random.default_rng(0), p, lo, hi, size=50)
        except DegenerateTruncationError:
            assert beta_cdf(hi, p) - beta_cdf(lo, p) < 1e-290
            return
        assert np.all((v > lo) & (v < hi))

    def test_degenerate_window(self):
        # Beta(50, 1) puts mass ~1e-500 below 1e-10: underflows to nothing
        with pytest.raises(DegenerateTruncationError):
            sample_beta_truncated(np.random.default_rng(0), BetaMS.from_shapes(50.0, 1.0), 0.0, 1e-10)

    def test_narrow_window_with_mass_is_sampled(self):
        v = sample_beta_truncated(np.random.default_rng(0), BetaMS(0.5, 2), 0.4999999, 0.5, size=10)
        assert np.all((v > 0.4999999) & (v < 0.5))

    def test_bad_bounds(self):
        with pytest.raises(ParameterDomainError):
            sample_beta_truncated(np.random.default_rng(0), BetaMS(0.5, 2), 0.6, 0.5)


class TestLinks:
    def test_examples(self):
        assert link_logit_inv(0.0) == 0.5
        assert link_log_inv(0.0) == 1.0
        assert link_logit_inv(-0.9365) == pytest.approx(1 / (1 + math.exp(0.9365)))
        # 1 / (1 + e^0.9365) = 0.28161, which rounds to 0.2816
        assert round(link_logit_inv(-0.9365), 4) == 0.2816

    def test_clipping(self):
        assert 0 < link_logit_inv(-800.0) < 1e-11
        assert 1 - 1e-11 < link_logit_inv(800.0) < 1
        assert link_log_inv(1000.0) == 1e12

    def test_non_finite(self):
        with pytest.raises(ParameterDomainError):
            link_logit_inv(np.nan)
