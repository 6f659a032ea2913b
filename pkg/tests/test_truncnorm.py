"""Truncated-Gaussian distribution against quadrature and finite-difference
oracles."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from emport import nmath, truncnorm
from emport.truncnorm import DegenerateSupportError, DomainError, TruncNormParams

P_SYM = TruncNormParams(0.5, 0.2, 0.0, 1.0)


def quad_pdf(p, f=lambda x: 1.0):
    val, _ = quad(lambda x: f(x) * truncnorm.pdf(p, x), p.a, p.b,
                  epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


class TestPdf:
    def test_outside_support_is_zero(self):
        assert truncnorm.pdf(P_SYM, 1.5) == 0.0
        assert truncnorm.pdf(P_SYM, -0.2) == 0.0

    def test_normalization(self):
        assert abs(quad_pdf(P_SYM) - 1.0) <= 1e-10

    def test_center_matches_cdf_oracle(self):
        # phi(0) / (beta * Z) with Z from the normal-cdf oracle
        Z = norm.cdf(2.5) - norm.cdf(-2.5)
        assert truncnorm.pdf(P_SYM, 0.5) == pytest.approx(
            norm.pdf(0.0) / (0.2 * Z), rel=1e-12)

    def test_invalid_params(self):
        with pytest.raises(DomainError):
            TruncNormParams(0.5, -0.1, 0.0, 1.0)
        with pytest.raises(DomainError):
            TruncNormParams(0.5, 0.2, 1.0, 0.0)
        with pytest.raises(DomainError):
            truncnorm.pdf(P_SYM, float("nan"))


class TestMoments:
    def test_symmetric_mean_exact(self):
        mean, _ = truncnorm.moments(P_SYM)
        assert mean == pytest.approx(0.5, abs=1e-15)

    def test_variance_quadrature(self):
        mean, var = truncnorm.moments(P_SYM)
        var_q = quad_pdf(P_SYM, lambda x: (x - mean) ** 2)
        assert var == pytest.approx(var_q, abs=1e-12)
        assert var == pytest.approx(0.03645, abs=1e-5)

    def test_uniform_limit(self):
        mean, var = truncnorm.moments(TruncNormParams(0.5, 1000.0, 0.0, 1.0))
        assert mean == pytest.approx(0.5, abs=1e-4)
        assert var == pytest.approx(1.0 / 12.0, abs=1e-4)

    def test_degenerate_support_signaled(self):
        with pytest.raises(DegenerateSupportError):
            truncnorm.moments(TruncNormParams(-1e7, 1e-3, 0.0, 1.0))


class TestEntropy:
    def test_uniform_limit(self):
        assert truncnorm.entropy(TruncNormParams(0.5, 1000.0, 0.0, 1.0)) == \
            pytest.approx(0.0, abs=1e-3)

    def test_quadrature(self):
        ent_q, _ = quad(
            lambda x: -truncnorm.pdf(P_SYM, x) * math.log(truncnorm.pdf(P_SYM, x)),
            0.0, 1.0, epsabs=1e-13, limit=200)
        assert truncnorm.entropy(P_SYM) == pytest.approx(ent_q, abs=1e-8)

    def test_correction_term_bounded_when_straddling(self):
        # (A phi(A) - B phi(B)) / (2Z) lies in [-1/2, 0] whenever A <= 0 <= B
        rng = np.random.default_rng(7)
        for _ in range(50):
            a, b = sorted(rng.uniform(-2.0, 2.0, size=2))
            if b - a < 1e-3:
                continue
            alpha = rng.uniform(a, b)
            beta = rng.uniform(0.05, 3.0)
            A, B = (a - alpha) / beta, (b - alpha) / beta
            Z = norm.cdf(B) - norm.cdf(A)
            corr = (A * norm.pdf(A) - B * norm.pdf(B)) / (2 * Z)
            assert -0.5 - 1e-12 <= corr <= 1e-12


class TestSampling:
    def test_median_symmetric(self):
        assert truncnorm.sample(P_SYM, 0.5) == pytest.approx(0.5, abs=1e-12)

    def test_boundary_limits(self):
        assert truncnorm.sample(P_SYM, 1e-15) == pytest.approx(0.0, abs=1e-12)
        assert truncnorm.sample(P_SYM, 1.0 - 1e-16) == pytest.approx(1.0, abs=1e-10)

    def test_u_domain(self):
        with pytest.raises(DomainError):
            truncnorm.sample(P_SYM, 0.0)
        with pytest.raises(DomainError):
            truncnorm.sample(P_SYM, 1.0)

    def test_monte_carlo_mean(self):
        p = TruncNormParams(0.7, 0.3, 0.0, 1.0)
        n = 10 ** 6
        u = np.random.Generator(np.random.Philox(key=11)).random(n)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        draws = truncnorm.ppf_vec(u, p.alpha, p.beta, p.a, p.b)
        mean, var = truncnorm.moments(p)
        se = math.sqrt(var / n)
        assert abs(float(draws.mean()) - mean) <= 4.0 * se


class TestMeanGrad:
    def test_symmetric_zero(self):
        assert truncnorm.log_pdf_mean_grad(P_SYM, 0.5) == pytest.approx(0.0, abs=1e-14)

    def test_symmetric_bounds_cancel(self):
        # at x = 0.7 the tail corrections cancel and the value is exactly
        # (0.7 - 0.5) / 0.04 = 5
        assert truncnorm.log_pdf_mean_grad(P_SYM, 0.7) == pytest.approx(5.0, rel=1e-12)

    def test_outside_support_rejected(self):
        with pytest.raises(DomainError):
            truncnorm.log_pdf_mean_grad(P_SYM, 1.2)

    def test_finite_difference(self):
        rng = np.random.default_rng(3)
        h = 1e-6
        for _ in range(100):
            a, b = sorted(rng.uniform(-2.0, 2.0, size=2))
            if b - a < 0.1:
                b = a + 0.1
            alpha = rng.uniform(a - 2.0, b + 2.0)
            beta = rng.uniform(0.05, 2.0)
            x = rng.uniform(a, b)
            p = TruncNormParams(alpha, beta, a, b)
            g = truncnorm.log_pdf_mean_grad(p, x)
            fd = (truncnorm.log_pdf(TruncNormParams(alpha + h, beta, a, b), x)
                  - truncnorm.log_pdf(TruncNormParams(alpha - h, beta, a, b), x)) / (2 * h)
            assert g == pytest.approx(fd, rel=1e-5, abs=1e-7)


class TestGibbsForm:
    def test_density_is_normalized_quadratic_exponential(self):
        # for a quadratic exponent h(pi) = c1 pi + c2 pi^2 with c2 < 0, the
        # normalized exp(h) on [a, b] is the truncated normal with
        # alpha = -c1/(2 c2), beta^2 = -1/(2 c2)
        for (c1, c2, a, b) in [(2.0, -1.7, 0.0, 1.0), (-0.5, -0.3, -1.0, 2.0),
                               (6.0, -4.0, 0.0, 1.0)]:
            Z_h, _ = quad(lambda s: math.exp(c1 * s + c2 * s * s), a, b,
                          epsabs=1e-14, epsrel=1e-13)
            p = TruncNormParams(-c1 / (2 * c2), math.sqrt(-1 / (2 * c2)), a, b)
            for x in np.linspace(a + 1e-3, b - 1e-3, 9):
                gibbs = math.exp(c1 * x + c2 * x * x) / Z_h
                assert truncnorm.pdf(p, x) == pytest.approx(gibbs, rel=1e-8)


@st.composite
def tn_params(draw):
    a = draw(st.floats(-3.0, 2.0))
    width = draw(st.floats(0.05, 4.0))
    beta = draw(st.floats(0.01, 50.0))
    offset = draw(st.floats(-10.0, 10.0))  # up to 10 scales off-center
    return TruncNormParams(a + width / 2 + offset * beta, beta, a, a + width)


class TestProperties:
    @settings(max_examples=120, deadline=None)
    @given(tn_params())
    def test_moment_bounds(self, p):
        mean, var = truncnorm.moments(p)
        assert p.a <= mean <= p.b
        assert 0.0 <= var <= p.beta ** 2
        if min(abs(p.A), abs(p.B)) <= 8.0:
            # truncation is material: strictly below the parent variance
            assert var < p.beta ** 2
        assert var <= ((p.b - p.a) / 2) ** 2 * (1 + 1e-9)

    @settings(max_examples=60, deadline=None)
    @given(tn_params())
    def test_normalization_and_entropy(self, p):
        assert quad_pdf(p) == pytest.approx(1.0, abs=1e-8)
        ent_q, _ = quad(
            lambda x: -truncnorm.pdf(p, x) * truncnorm.log_pdf(p, x),
            p.a, p.b, epsabs=1e-12, limit=300)
        assert truncnorm.entropy(p) == pytest.approx(ent_q, abs=1e-8)

    @settings(max_examples=80, deadline=None)
    @given(tn_params(), st.floats(0.01, 0.99))
    def test_ppf_cdf_roundtrip(self, p, u):
        x = truncnorm.sample(p, u)
        assert p.a <= x <= p.b
        if p.a + 1e-12 < x < p.b - 1e-12:
            assert truncnorm.cdf(p, x) == pytest.approx(u, abs=1e-9)


class TestVectorAgreement:
    def test_vector_matches_scalar(self):
        # the vectorized lane serves the simulation paths, whose standardized
        # bounds stay within a few units; the scalar lane carries the
        # far-tail branch
        rng = np.random.default_rng(5)
        alpha = rng.uniform(-3.0, 4.0, size=400)
        beta = rng.uniform(0.05, 30.0, size=400)
        A = (0.0 - alpha) / beta
        B = (1.0 - alpha) / beta
        keep = np.minimum(np.abs(A), np.abs(B)) <= 30.0
        alpha, beta = alpha[keep], beta[keep]
        assert keep.sum() >= 300
        mv, vv, ev, lz = truncnorm.stats_vec(alpha, beta, 0.0, 1.0)
        for i in range(len(alpha)):
            m, v, e, z = nmath.tn_stats(alpha[i], beta[i], 0.0, 1.0)
            assert mv[i] == pytest.approx(m, rel=1e-11, abs=1e-12)
            assert vv[i] == pytest.approx(v, rel=1e-9, abs=1e-13)
            assert ev[i] == pytest.approx(e, rel=1e-9, abs=1e-11)
            assert lz[i] == pytest.approx(z, rel=1e-11, abs=1e-11)
