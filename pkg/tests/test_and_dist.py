import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from lcare import and_dist as ad
from lcare.and_dist import AndParams

TAUS = [0.0025, 0.01, 0.05, 0.5, 0.9]


def test_check_function_values():
    assert ad.check_function(0.0, 0.3) == 0.0
    assert ad.check_function(2.0, 0.05) == pytest.approx(0.2)
    assert ad.check_function(-2.0, 0.05) == pytest.approx(3.8)


def test_params_validate():
    with pytest.raises(ValueError):
        AndParams(0.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        AndParams(0.0, 1.0, 1.0)


@pytest.mark.parametrize("tau", TAUS)
def test_pdf_normalizes(tau):
    p = AndParams(0.3, 1.7, tau)
    left, _ = integrate.quad(lambda y: ad.pdf(y, p), -np.inf, p.mu, epsabs=1e-12, epsrel=1e-12)
    right, _ = integrate.quad(lambda y: ad.pdf(y, p), p.mu, np.inf, epsabs=1e-12, epsrel=1e-12)
    assert abs(left + right - 1.0) < 1e-8


def test_symmetric_case_is_standard_normal():
    y = np.linspace(-8, 8, 2001)
    assert np.max(np.abs(ad.pdf(y, AndParams(0, 1, 0.5)) - stats.norm.pdf(y))) < 1e-14


def test_constant_matches_quadrature_of_kernel():
    p = AndParams(0.0, 1.0, 0.05)
    k = lambda u: math.exp(-ad.check_function(u, 0.05))
    mass = integrate.quad(k, -np.inf, 0)[0] + integrate.quad(k, 0, np.inf)[0]
    assert ad.pdf(0.0, p) == pytest.approx(1.0 / mass, rel=1e-10)


def test_cdf_values_and_branch_mass():
    assert ad.cdf(0.0, AndParams(0, 1, 0.5)) == pytest.approx(0.5)
    for tau in TAUS:
        p = AndParams(-0.2, 0.8, tau)
        closed = math.sqrt(tau) / (math.sqrt(tau) + math.sqrt(1 - tau))
        numeric = integrate.quad(lambda y: ad.pdf(y, p), -np.inf, p.mu)[0]
        assert ad.cdf(p.mu, p) == pytest.approx(closed, abs=1e-12)
        assert numeric == pytest.approx(closed, abs=1e-9)
        assert ad.cdf(-np.inf, p) == 0.0 and ad.cdf(np.inf, p) == 1.0


@pytest.mark.parametrize("tau", TAUS)
def test_cdf_derivative_is_pdf(tau):
    p = AndParams(0.1, 1.3, tau)
    y = np.linspace(-4, 6, 101)
    h = 1e-5
    fd = (ad.cdf(y + h, p) - ad.cdf(y - h, p)) / (2 * h)
    assert np.max(np.abs(fd - ad.pdf(y, p))) < 1e-6


def test_partial_first_moment_examples():
    p = AndParams(0, 1, 0.5)
    assert ad.partial_first_moment(0.0, p) == pytest.approx(-1 / math.sqrt(2 * math.pi), abs=1e-12)
    q = AndParams(0.4, 2.0, 0.05)
    assert ad.partial_first_moment(np.inf, q) == pytest.approx(ad.mean(q), abs=1e-12)
    total = integrate.quad(lambda y: y * ad.pdf(y, q), -np.inf, q.mu)[0] + \
        integrate.quad(lambda y: y * ad.pdf(y, q), q.mu, np.inf)[0]
    assert ad.mean(q) == pytest.approx(total, abs=1e-9)


@given(st.floats(-3, 3), st.floats(-1, 1), st.floats(0.2, 3), st.floats(0.002, 0.998))
def test_partial_first_moment_quadrature(q, mu, sigma, tau):
    p = AndParams(mu, sigma, tau)
    pts = sorted({mu, q})
    lo = integrate.quad(lambda y: y * ad.pdf(y, p), -np.inf, pts[0], epsabs=1e-12)[0]
    mid = integrate.quad(lambda y: y * ad.pdf(y, p), pts[0], q, epsabs=1e-12)[0] if q > pts[0] else 0.0
    assert ad.partial_first_moment(q, p) == pytest.approx(lo + mid, abs=1e-8)


@given(st.floats(0.002, 0.998), st.floats(-2, 2), st.floats(0.1, 5))
def test_ppf_inverts_cdf(tau, mu, sigma):
    p = AndParams(mu, sigma, tau)
    y = np.linspace(mu - 3 * sigma, mu + 3 * sigma, 25)
    u = ad.cdf(y, p)
    inner = (u > 1e-12) & (u < 1 - 1e-12)
    assert np.max(np.abs(ad.ppf(u[inner], p) - y[inner])) < 1e-8
    assert np.all(np.diff(ad.cdf(np.linspace(-50, 50, 500), p)) >= 0)


def test_sampler_ks_symmetric():
    x = ad.sample(AndParams(0.0, 1.0, 0.5), 100_000, seed=7)
    assert stats.kstest(x, "norm").pvalue > 0.01


def test_sampler_ks_asymmetric():
    p = AndParams(0.2, 1.5, 0.05)
    x = ad.sample(p, 100_000, seed=8)
    assert stats.kstest(x, lambda v: ad.cdf(v, p)).pvalue > 0.01


def test_sampler_branch_mass_and_determinism():
    p = AndParams(0.0, 1.0, 0.05)
    n = 1_000_000
    x = ad.sample(p, n, seed=3)
    frac = np.mean(x <= 0)
    pm = p.left_mass
    assert abs(frac - pm) < 3 * math.sqrt(pm * (1 - pm) / n)
    assert np.array_equal(ad.sample(p, 100, seed=5), ad.sample(p, 100, seed=5))


def _sample_expectile(x, level):
    e = np.mean(x)
    for _ in range(200):
        w = np.where(x <= e, 1 - level, level)
        e_new = np.sum(w * x) / np.sum(w)
        if abs(e_new - e) < 1e-14:
            break
        e = e_new
    return e


@given(st.floats(-2, 2), st.floats(0.1, 3), st.floats(0.003, 0.997))
def test_expectile_identity(mu, sigma, tau):
    assert ad.expectile_of(AndParams(mu, sigma, tau), tau) == pytest.approx(mu, abs=1e-9 * max(1, sigma))


def test_expectile_of_symmetric_is_mean():
    assert ad.expectile_of(AndParams(0, 1, 0.5), 0.5) == pytest.approx(0.0, abs=1e-10)


def test_expectile_of_matches_sample_oracle():
    x = ad.sample(AndParams(0, 1, 0.5), 1_000_000, seed=11)
    target = _sample_expectile(x, 0.1)
    assert ad.expectile_of(AndParams(0, 1, 0.5), 0.1) == pytest.approx(target, abs=5e-3)


def test_tau_for_alpha_symmetric_and_monotone():
    m = ad.tau_for_alpha(0.5, AndParams(0, 1, 0.5))
    assert m.tau_alpha == pytest.approx(0.5, abs=1e-12)
    p = AndParams(0, 1, 0.05)
    taus = [ad.tau_for_alpha(a, p).tau_alpha for a in np.linspace(0.01, 0.99, 50)]
    assert np.all(np.diff(taus) > 0)


def test_alpha_for_tau_symmetric():
    assert ad.alpha_for_tau(0.5, AndParams(0, 1, 0.5)).alpha == pytest.approx(0.5, abs=1e-8)


def test_alpha_for_tau_equals_branch_mass():
    # mu is the tau-expectile, so the matching quantile level is F(mu)
    for tau in (0.0025, 0.01, 0.05, 0.3):
        p = AndParams(0, 1, tau)
        assert ad.alpha_for_tau(tau, p).alpha == pytest.approx(p.left_mass, abs=1e-9)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.5))
def test_alpha_tau_round_trip(alpha, tau):
    p = AndParams(0, 1, tau)
    t = ad.tau_for_alpha(alpha, p).tau_alpha
    back = ad.alpha_for_tau(t, p)
    assert back.alpha == pytest.approx(alpha, abs=1e-6)
    assert abs(ad.tau_for_alpha(back.alpha, p).tau_alpha - t) < 1e-8


@pytest.mark.parametrize("alpha", [0.01, 0.065, 0.2, 0.7])
def test_mapping_scale_invariant(alpha):
    vals = [ad.tau_for_alpha(alpha, AndParams(0, s, 0.05)).tau_alpha for s in (0.5, 1.0, 2.0)]
    assert max(vals) - min(vals) < 1e-8
