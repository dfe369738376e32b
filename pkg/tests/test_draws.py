from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate
from scipy.special import digamma, expit, gamma as gamma_fn, polygamma

from smepr.core import FamilyKind, HyperpriorConfig
from smepr.draws import (NumericError, RngStream, ThetaDraw, draw_gaussian_blocks, draw_predictive,
                         draw_pseudo_data, draw_pseudo_datum, draw_theta, inv_gamma, log_density)

N5 = 100_000


def gen(*keys, seed=1234):
    return RngStream(seed, 0).generator(*keys)


def within_se(samples, target, k=5.0):
    se = samples.std(ddof=1) / np.sqrt(len(samples))
    assert abs(samples.mean() - target) <= k * se, (samples.mean(), target, se)


def test_gamma_prior_mean_million():
    cfg = HyperpriorConfig()
    x = gen(1).gamma(cfg.rho_beta_shape, 1.0 / cfg.rho_beta_rate, 1_000_000)
    assert abs(x.mean() - 1.0) < 0.01


def test_inverse_gamma_3_2_mean_million():
    x = inv_gamma(3.0, 2.0, gen(2), 1_000_000)
    assert abs(x.mean() - 1.0) < 0.01


def test_draw_theta_marginals():
    cfg = HyperpriorConfig(sigma2_row_shape=3.0, sigma2_row_scale=2.0)
    rhos, rows = [], []
    for t in range(20_000):
        th = draw_theta(cfg, RngStream(5, t).generator(1), np.array([True]))
        rhos.append(th.rho_beta)
        rows.append(th.row_sigma2[0])
    within_se(np.array(rhos), 1.0)
    within_se(np.array(rows), 1.0)


def test_draw_theta_deterministic_and_masked():
    mask = np.array([True, False, True])
    a = draw_theta(HyperpriorConfig(), RngStream(9, 4).generator(1, 0), mask)
    b = draw_theta(HyperpriorConfig(), RngStream(9, 4).generator(1, 0), mask)
    np.testing.assert_array_equal(a.scalars(), b.scalars())
    np.testing.assert_array_equal(a.row_sigma2, b.row_sigma2)
    assert np.isnan(a.row_sigma2[1]) and np.all(a.row_sigma2[[0, 2]] > 0)
    assert np.all(a.scalars() > 0)


def test_streams_distinct():
    a = RngStream(1, 0).generator(0).random(5)
    b = RngStream(1, 1).generator(0).random(5)
    c = RngStream(1, 0).generator(1).random(5)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_logitbeta_pseudo_is_standard_logistic():
    y = draw_pseudo_data(FamilyKind("logitbeta"), np.zeros(N5), gen(3), row_sigma2=np.ones(N5))
    assert abs(y.mean()) < 0.02
    assert abs(y.var() - np.pi**2 / 3) < 0.05
    # independent oracle: logit of a uniform
    u = np.random.default_rng(7).random(N5)
    ref = np.log(u / (1 - u))
    assert abs(y.var() - ref.var()) < 0.1


def test_weibull_pseudo_digamma_one():
    y = draw_pseudo_data(FamilyKind("weibull"), np.ones(N5), gen(4), rho_z=1.0)
    assert abs(y.mean() - digamma(1.0)) < 0.01


def test_weibull_pseudo_rate_scaling():
    z = np.full(N5, 2.0)
    y = draw_pseudo_data(FamilyKind("weibull"), z, gen(5), rho_z=3.0)
    within_se(y, digamma(1.0) - 3.0 * np.log(2.0))


def test_poisson_pseudo_digamma_half():
    y = draw_pseudo_data(FamilyKind("poisson"), np.zeros(N5), gen(6))
    assert abs(y.mean() - digamma(0.5)) < 0.02


def test_binomial_pseudo_mean():
    fam = FamilyKind("binomial")
    z = np.full(N5, 2.0)
    y = draw_pseudo_data(fam, z, gen(7), trials=np.full(N5, 5))
    a, b = 2.5, 5 + 1.0 - 2.5
    within_se(y, digamma(a) - digamma(b))


def test_gaussian_pseudo_moments():
    y = draw_pseudo_data(FamilyKind("gaussian"), np.full(N5, 3.0), gen(8), row_sigma2=np.full(N5, 4.0))
    within_se(y, 3.0)
    assert abs(y.var() - 4.0) < 0.1


def test_pseudo_datum_wrapper_matches_vector():
    th = ThetaDraw(1, 1, 1, 1, 1, 1, 2.0, np.array([]))
    a = draw_pseudo_datum(FamilyKind("weibull"), 1.5, th, gen(9))
    b = draw_pseudo_data(FamilyKind("weibull"), np.array([1.5]), gen(9), rho_z=2.0)[0]
    assert a == b


def test_weibull_pseudo_log_space_has_no_overflow():
    # z**rho would overflow; log(G) - rho*log(z) does not
    y = draw_pseudo_data(FamilyKind("weibull"), np.array([1e300]), gen(10), rho_z=1e3)
    assert np.isfinite(y).all() and y[0] < -6e5


def test_underflowing_gamma_raises_numeric_error():
    with pytest.raises(NumericError):
        draw_pseudo_data(FamilyKind("poisson", alpha_xi=1e-300), np.zeros(1000), gen(18))


def test_gaussian_blocks():
    th = ThetaDraw(1.0, 4.0, 1.0, 1, 1, 1, 1, np.array([]))
    wb, we, wx = draw_gaussian_blocks(th, 0, 3, 2, gen(11))
    assert wb.shape == (0,) and we.shape == (3,) and wx.shape == (2,)
    wb, _, _ = draw_gaussian_blocks(th, N5, 0, 0, gen(12))
    assert abs(wb.var() - 4.0) < 0.1
    again = draw_gaussian_blocks(th, 5, 5, 5, gen(13))
    np.testing.assert_array_equal(np.concatenate(again),
                                  np.concatenate(draw_gaussian_blocks(th, 5, 5, 5, gen(13))))


def test_predictive_examples():
    w = draw_predictive(FamilyKind("weibull"), np.zeros(N5), gen(14), rho_z=1.0)
    assert abs(w.mean() - 1.0) < 0.02
    w2 = draw_predictive(FamilyKind("weibull"), np.zeros(N5), gen(15), rho_z=2.0)
    assert abs(w2.mean() - gamma_fn(1.5)) < 0.01
    b = draw_predictive(FamilyKind("binomial"), np.zeros(N5), gen(16), trials=1)
    assert abs(b.mean() - 0.5) < 0.005


def test_predictive_poisson_overflow_names_replicate():
    with pytest.raises(NumericError, match="replicate 7"):
        draw_predictive(FamilyKind("poisson"), np.array([800.0]), gen(17), replicate=7)


SETTINGS = {
    "gaussian": [(0.0, dict(row_sigma2=1.0)), (2.0, dict(row_sigma2=0.25)), (-1.0, dict(row_sigma2=3.0))],
    "logitbeta": [(0.0, dict(row_sigma2=1.0)), (1.0, dict(row_sigma2=0.5)), (-2.0, dict(row_sigma2=2.0))],
    "weibull": [(0.0, dict(rho_z=1.0)), (0.5, dict(rho_z=2.0)), (-1.0, dict(rho_z=0.7))],
    "poisson": [(0.0, {}), (1.0, {}), (-1.5, {})],
    "binomial": [(0.0, dict(trials=1)), (1.0, dict(trials=5)), (-2.0, dict(trials=10))],
}


def analytic_moments(tag, Y, kw, fam):
    if tag == "gaussian":
        return Y, kw["row_sigma2"]
    if tag == "logitbeta":
        a, k = fam.alpha_z, fam.kappa_z
        s2 = kw["row_sigma2"]
        return Y + np.sqrt(s2) * (digamma(a) - digamma(k - a)), s2 * (polygamma(1, a) + polygamma(1, k - a))
    if tag == "weibull":
        rho = kw["rho_z"]
        lam = np.exp(-Y / rho)
        m1 = lam * gamma_fn(1 + 1 / rho)
        return m1, lam**2 * gamma_fn(1 + 2 / rho) - m1**2
    if tag == "poisson":
        return np.exp(Y), np.exp(Y)
    p = expit(Y)
    return kw["trials"] * p, kw["trials"] * p * (1 - p)


@pytest.mark.parametrize("tag", sorted(SETTINGS))
def test_predictive_moments_match_analytic(tag):
    fam = FamilyKind(tag)
    for i, (Y, kw) in enumerate(SETTINGS[tag]):
        x = draw_predictive(fam, np.full(N5, Y), gen(20, i, seed=len(tag)), **kw)
        mean, var = analytic_moments(tag, Y, kw, fam)
        se_mean = np.sqrt(var / N5)
        assert abs(x.mean() - mean) <= 5 * se_mean
        # variance SE from the fourth central moment estimate
        se_var = np.sqrt(np.mean((x - x.mean()) ** 4) / N5)
        assert abs(x.var(ddof=1) - var) <= 5 * se_var + 1e-12


def test_log_density_examples():
    assert np.isclose(log_density(FamilyKind("gaussian"), 1.0, 1.0, row_sigma2=1.0), -0.5 * np.log(2 * np.pi))
    assert np.isclose(log_density(FamilyKind("poisson"), 0.0, 0.0), -1.0)
    assert np.isclose(log_density(FamilyKind("weibull"), 1.0, 0.0, rho_z=1.0), -1.0)
    with pytest.raises(ValueError):
        log_density(FamilyKind("weibull"), -1.0, 0.0)


def test_log_density_normalizes():
    for Y, s2 in ((0.0, 1.0), (1.0, 0.3)):
        for tag in ("gaussian", "logitbeta"):
            f = lambda z: np.exp(log_density(FamilyKind(tag), z, Y, row_sigma2=s2))  # noqa: E731
            assert abs(integrate.quad(f, -np.inf, np.inf)[0] - 1.0) < 1e-6
    for Y, rho in ((0.0, 1.0), (0.7, 2.5), (-1.0, 0.6)):
        f = lambda z: np.exp(log_density(FamilyKind("weibull"), z, Y, rho_z=rho))  # noqa: E731
        assert abs(integrate.quad(f, 0, np.inf, limit=200)[0] - 1.0) < 1e-6
    for Y in (-1.0, 0.0, 2.0):
        k = np.arange(0, 200)
        assert abs(np.exp(log_density(FamilyKind("poisson"), k, Y)).sum() - 1.0) < 1e-6
        m = 7
        k = np.arange(0, m + 1)
        assert abs(np.exp(log_density(FamilyKind("binomial"), k, Y, trials=m)).sum() - 1.0) < 1e-6
