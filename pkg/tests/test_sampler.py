from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from conftest import fit_from_gamma, make_obs
from smepr.core import DesignSpec, FamilyKind
from smepr.draws import RngStream, draw_predictive
from smepr.sampler import FitConfig, predict, response_mean, run_fit, weibull_mean_transform
from smepr.simgen import StudySpec, generate
from smepr.subset import ConfigError

POIS = FamilyKind("poisson")
WEIB = FamilyKind("weibull")


def test_same_seed_any_thread_count(gaussian_1d):
    obs, design, fams = gaussian_1d
    cfg = FitConfig(fams, design, T=40, n=20, seed=5, store_replicates=True)
    a = run_fit(obs, cfg)
    b = run_fit(obs, dataclasses.replace(cfg, threads=4))
    for name in ("beta", "eta", "theta"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    np.testing.assert_array_equal(a.latent.mean, b.latent.mean)
    for x, y in zip(a.xi, b.xi):
        np.testing.assert_array_equal(x, y)


def test_all_mode_equals_full_srs(gaussian_1d):
    obs, design, fams = gaussian_1d
    N = int((~obs.holdout).sum())
    a = run_fit(obs, FitConfig(fams, design, T=15, mode="all", seed=2))
    b = run_fit(obs, FitConfig(fams, design, T=15, n=N, mode="srs", seed=2))
    np.testing.assert_array_equal(a.gamma, b.gamma)


def test_config_errors(gaussian_1d):
    obs, design, fams = gaussian_1d
    with pytest.raises(ConfigError):
        FitConfig(fams, design, T=0)
    with pytest.raises(ConfigError):
        FitConfig(fams, design, quantiles=(0.0, 0.5))
    with pytest.raises(ConfigError):
        run_fit(obs, FitConfig(fams, design, T=2, n=1000))


def test_midpoint_mean_without_coefficients():
    z = np.array([[2.0, -1.0, 4.0]])
    obs = make_obs(z)
    T = 10_000
    fit = run_fit(obs, FitConfig((FamilyKind("gaussian"),), DesignSpec(((),)), T=T, mode="all",
                                 seed=9, store_replicates=True))
    xi = np.vstack(fit.xi)
    se = xi.std(axis=0, ddof=1) / np.sqrt(T)
    assert np.all(np.abs(xi.mean(axis=0) - z[0] / 2) < 5 * se)
    np.testing.assert_allclose(np.median(xi, axis=0), z[0] / 2, atol=0.05)


def test_summary_means_match_replicates(gaussian_1d):
    obs, design, fams = gaussian_1d
    fit = run_fit(obs, FitConfig(fams, design, T=50, n=25, seed=1, store_replicates=True))
    Y = fit.latent_replicates(np.arange(obs.n_sites))
    np.testing.assert_allclose(fit.latent.mean, Y.mean(axis=1), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(fit.coefficients.mean, fit.gamma.mean(axis=0), rtol=1e-12, atol=1e-12)


def test_replicates_uncorrelated(gaussian_1d):
    obs, design, fams = gaussian_1d
    T = 2000
    fit = run_fit(obs, FitConfig(fams, design, T=T, n=20, seed=4))
    for chain in (fit.beta[:, 0], fit.beta[:, 1], np.log(fit.theta_column("rho_z"))):
        c = chain - chain.mean()
        r1 = float(c[1:] @ c[:-1] / (c @ c))
        assert abs(r1) < 5 / np.sqrt(T)


def test_prediction_stride_and_holdout(gaussian_1d):
    obs, design, fams = gaussian_1d
    fit = run_fit(obs, FitConfig(fams, design, T=5, n=10, predict_stride=3))
    np.testing.assert_array_equal(fit.latent.rows, np.arange(0, obs.n_sites, 3))
    full = predict(fit, obs)
    assert len(full.rows) == obs.n_sites  # holdout sites included


def test_weibull_transform_examples():
    assert weibull_mean_transform(0.0, 1.0) == pytest.approx(1.0)
    assert weibull_mean_transform(1.0, 1.0) == pytest.approx(np.exp(-1.0))
    assert weibull_mean_transform(0.0, 2.0) == pytest.approx(gamma_fn(1.5))
    sim = draw_predictive(WEIB, np.zeros(100_000), RngStream(0).generator(), rho_z=2.0)
    assert sim.mean() == pytest.approx(gamma_fn(1.5), abs=0.01)
    with pytest.raises(ValueError):
        weibull_mean_transform(0.0, 0.0)


def test_constant_replicates_degenerate_summary():
    X = np.array([[1.0], [1.0], [1.0]])
    fit = fit_from_gamma(np.full((7, 1), 2.5), X, (FamilyKind("gaussian"),))
    s = predict(fit, make_obs([[0.0, 1.0, 2.0]]), "latent")
    np.testing.assert_array_equal(s.mean, [2.5, 2.5, 2.5])
    np.testing.assert_array_equal(s.sd, 0.0)


def test_poisson_response_mean_average():
    X = np.array([[1.0]])
    fit = fit_from_gamma(np.array([[0.0], [np.log(2.0)]]), X, (POIS,))
    s = predict(fit, make_obs([[1.0]]), "response_mean")
    assert s.mean[0] == pytest.approx(1.5, rel=1e-14)


def test_weibull_response_mean_matches_simulation():
    g = RngStream(3).generator()
    for Y, rho in [(-0.5, 1.0), (0.3, 2.0), (1.2, 3.5)]:
        sim = draw_predictive(WEIB, np.full(100_000, Y), g, rho_z=rho)
        se = sim.std(ddof=1) / np.sqrt(sim.size)
        assert abs(response_mean(WEIB, Y, rho) - sim.mean()) < 3 * se


def test_binomial_response_mean():
    assert response_mean(FamilyKind("binomial"), 0.0, trials=4) == pytest.approx(2.0)


@pytest.mark.slow
def test_wall_time_linear_in_subset_size():
    # per-replicate cost = a part independent of n (prior draws, the (p+r)-sized solve)
    # plus a part that should scale linearly in n; the former is measured at tiny n
    study = generate(StudySpec("gauss", 12_000, seed=0))
    cfg = FitConfig(study.families, study.design, T=800, seed=0, summarize_latent=False)

    def wall(n):
        return min(run_fit(study.obs, dataclasses.replace(cfg, n=n)).timings["replicates"]
                   for _ in range(3))

    wall(1000)  # warm-up
    fixed = wall(10)
    grid = [1000, 2000, 4000, 8000]
    times = np.array([wall(n) for n in grid]) - fixed
    slope = np.polyfit(np.log(grid), np.log(times), 1)[0]
    assert abs(slope - 1) <= 0.25, (fixed, times, slope)
