"""Scores for fitted models: MSPE, coefficient MSE, HOVE, PMCC, CRPS, WAIC and the elbow scan.

Scores that need new random quantities (predictive draws, row variances for
the LogitBeta and Gaussian families) draw them from the replicate's own
stream under dedicated sub-keys, one generator per (replicate, row chunk),
so every score is reproducible from the fit's seed alone.
"""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import ObservationSet
from .draws import RngStream, draw_predictive, inv_gamma, log_density
from .sampler import FitConfig, FitResult, response_mean, run_fit

SCORE_NAMES = ("MSPE", "MSE", "HOVE", "PMCC", "CRPS", "WAIC")
METRIC_CHUNK = 2048

# sub-stream keys, continuing the sampler's (subset, theta, pseudo, gauss) = 0..3
_PREDICT_KEY, _DENSITY_KEY = 4, 5


def _row_types(fit: FitResult, rows):
    return fit.row_type(rows)


def comparison_scale(fit: FitResult, rows) -> np.ndarray:
    """Replicates on the scale used for MSPE, shape ``(len(rows), T)``.

    Weibull rows are divided by the replicate's shape ``rho_z``: ``Y / rho``
    is minus the log Weibull scale parameter, which for the shape-1 truth is
    the true latent value.  Every other family is compared on ``Y`` itself.
    """
    rows = np.asarray(rows)
    Y = fit.latent_replicates(rows)
    types = _row_types(fit, rows)
    rho = fit.theta_column("rho_z")
    for k, fam in enumerate(fit.config.families):
        if fam.tag == "weibull":
            sel = types == k + 1
            Y[sel] /= rho[None, :]
    return Y


def _chunked_mean(fn, rows, chunk=METRIC_CHUNK):
    rows = np.asarray(rows)
    out = np.empty(len(rows))
    for start in range(0, len(rows), chunk):
        sl = slice(start, start + chunk)
        out[sl] = fn(rows[sl]).mean(axis=1)
    return out


def _split(values, types, K):
    """Pooled mean and per-type means of per-row ``values``."""
    per = np.array([values[types == k].mean() if np.any(types == k) else np.nan
                    for k in range(1, K + 1)])
    return float(values.mean()), per


def mspe(true_latent, fit: FitResult, rows=None, by_type: bool = False):
    """Mean squared difference between the true latent values and posterior-mean latents.

    ``true_latent`` is indexed by canonical row; ``rows`` defaults to every row.
    """
    if true_latent is None:
        raise ValueError("MSPE needs the true latent process")
    true_latent = np.asarray(true_latent, dtype=float)
    rows = np.arange(len(true_latent)) if rows is None else np.asarray(rows)
    if len(rows) == 0:
        raise ValueError("no rows to score")
    est = _chunked_mean(lambda rr: comparison_scale(fit, rr), rows)
    sq = (true_latent[rows] - est) ** 2
    pooled, per = _split(sq, _row_types(fit, rows), fit.K)
    return (pooled, per) if by_type else pooled


def mse_coeffs(true_beta, true_eta, fit: FitResult) -> float:
    """MSE of the posterior-mean ``(beta, eta)`` against the true coefficients."""
    truth = np.concatenate([np.ravel(true_beta), np.ravel(true_eta)])
    est = fit.gamma.mean(axis=0)
    if truth.shape != est.shape:
        raise ValueError(f"true coefficients have {truth.size} entries, fit has {est.size}")
    return float(np.mean((truth - est) ** 2))


def coefficient_type_mask(fit: FitResult, k: int) -> np.ndarray:
    """Coefficients that enter type ``k``: its own betas plus its own and shared basis blocks."""
    design = fit.config.design
    mask = [name.split(":", 1)[0] == str(k) for name in design.beta_names()]
    for block in design.blocks:
        mask.extend([block.scope in (None, k)] * block.width)
    return np.array(mask, dtype=bool)


def observed_rows(obs: ObservationSet, holdout: bool) -> np.ndarray:
    """Canonical rows with a response at holdout (or training) sites."""
    positions = obs.holdout_positions() if holdout else obs.nonholdout_positions()
    z = obs.canonical_z()
    rows = (np.arange(obs.K)[:, None] * obs.n_sites + positions[None, :]).ravel()
    return rows[np.isfinite(z[rows])]


def _response_means(fit, obs, rows):
    trials = obs.canonical_trials()
    rho = fit.theta_column("rho_z")[None, :]
    types = _row_types(fit, rows)

    def values(rr):
        Y = fit.latent_replicates(rr)
        tt = fit.row_type(rr)
        for k, fam in enumerate(fit.config.families):
            sel = tt == k + 1
            if sel.any():
                Y[sel] = response_mean(fam, Y[sel], rho, trials[rr[sel]][:, None])
        return Y

    return _chunked_mean(values, rows), types


def hove(obs: ObservationSet, fit: FitResult, rows=None, by_type: bool = False):
    """Holdout validation error: mean of ``(z - E[z_new | data])^2`` over held-out rows."""
    rows = observed_rows(obs, holdout=True) if rows is None else np.asarray(rows)
    if len(rows) == 0:
        raise ValueError("holdout set is empty")
    means, types = _response_means(fit, obs, rows)
    sq = (obs.canonical_z()[rows] - means) ** 2
    pooled, per = _split(sq, types, fit.K)
    return (pooled, per) if by_type else pooled


def pmcc_rows(z, draws) -> np.ndarray:
    """Per-row ``(z - mean)^2 + var`` with the ``T - 1`` sample variance."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    z = np.asarray(z, dtype=float).reshape(-1)
    if draws.shape[1] < 2:
        raise ValueError("PMCC needs at least two predictive draws per row")
    return (z - draws.mean(axis=1)) ** 2 + draws.var(axis=1, ddof=1)


def pmcc(z, draws) -> float:
    return float(pmcc_rows(z, draws).mean())


def crps_rows(z, draws) -> np.ndarray:
    """Per-row sample CRPS ``mean|X - z| - mean|X - X'| / 2``.

    The pair term uses the sorted-sample identity
    ``sum_ij |x_i - x_j| = 2 sum_i (2i - T + 1) x_(i)``, which equals
    enumerating all ``T^2`` ordered pairs.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    z = np.asarray(z, dtype=float).reshape(-1)
    T = draws.shape[1]
    if T < 2:
        raise ValueError("CRPS needs at least two draws per row")
    first = np.abs(draws - z[:, None]).mean(axis=1)
    x = np.sort(draws, axis=1)
    weights = 2.0 * np.arange(T) - T + 1.0
    pair = 2.0 * (x @ weights) / T**2
    return np.maximum(first - 0.5 * pair, 0.0)


def crps_empirical(z, draws) -> float:
    return float(crps_rows(z, draws).mean())


def _row_scale_draws(fit, rows, key, chunk_id, t):
    """Prior row variances for the LogitBeta/Gaussian rows of one chunk and replicate."""
    hp = fit.config.hyperpriors
    g = RngStream(fit.config.seed, t).generator(key, chunk_id)
    return inv_gamma(hp.sigma2_row_shape, hp.sigma2_row_scale, g, len(rows)), g


def predictive_draws(fit: FitResult, obs: ObservationSet, rows, chunk_id: int = 0) -> np.ndarray:
    """One new response per replicate for each row, shape ``(len(rows), T)``."""
    rows = np.asarray(rows)
    Y = fit.latent_replicates(rows)
    trials = obs.canonical_trials()[rows]
    types = _row_types(fit, rows)
    rho = fit.theta_column("rho_z")
    out = np.empty_like(Y)
    for t in range(fit.T):
        s2, g = _row_scale_draws(fit, rows, _PREDICT_KEY, chunk_id, t)
        for k, fam in enumerate(fit.config.families):
            sel = types == k + 1
            if sel.any():
                out[sel, t] = draw_predictive(fam, Y[sel, t], g, rho_z=rho[t], row_sigma2=s2[sel],
                                              trials=trials[sel], replicate=t)
    return out


def predictive_scores(fit: FitResult, obs: ObservationSet, rows=None, chunk=METRIC_CHUNK):
    """Per-row PMCC and CRPS over held-out rows from per-replicate predictive draws."""
    rows = observed_rows(obs, holdout=True) if rows is None else np.asarray(rows)
    z = obs.canonical_z()
    pm = np.empty(len(rows))
    cr = np.empty(len(rows))
    for c, start in enumerate(range(0, len(rows), chunk)):
        sl = slice(start, start + chunk)
        draws = predictive_draws(fit, obs, rows[sl], chunk_id=c)
        pm[sl] = pmcc_rows(z[rows[sl]], draws)
        cr[sl] = crps_rows(z[rows[sl]], draws)
    return rows, pm, cr


def log_density_matrix(fit: FitResult, obs: ObservationSet, rows, chunk_id: int = 0) -> np.ndarray:
    """``log f(z_i | Y_i^(t), theta^(t))`` for each row and replicate."""
    rows = np.asarray(rows)
    Y = fit.latent_replicates(rows)
    z = obs.canonical_z()[rows]
    trials = obs.canonical_trials()[rows]
    types = _row_types(fit, rows)
    rho = fit.theta_column("rho_z")
    out = np.empty_like(Y)
    scaled = [fam.uses_row_scale for fam in fit.config.families]
    s2 = None
    if any(scaled):
        s2 = np.column_stack([_row_scale_draws(fit, rows, _DENSITY_KEY, chunk_id, t)[0]
                              for t in range(fit.T)])
    for k, fam in enumerate(fit.config.families):
        sel = types == k + 1
        if sel.any():
            out[sel] = log_density(fam, z[sel][:, None], Y[sel], rho_z=rho[None, :],
                                   row_sigma2=None if s2 is None else s2[sel],
                                   trials=trials[sel][:, None])
    return out


def waic_from_log_density(L) -> tuple[float, np.ndarray]:
    """Per-observation WAIC from a ``(rows, T)`` log-density matrix; also returns per-row terms."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    T = L.shape[1]
    if T < 2:
        raise ValueError("WAIC needs at least two replicates")
    with np.errstate(over="ignore", invalid="ignore"):
        lppd = logsumexp(L, axis=1) - np.log(T)
        p_waic = L.var(axis=1, ddof=1)
        # a replicate with zero density makes the variance unbounded
        p_waic[~np.all(np.isfinite(L), axis=1) | np.isnan(p_waic)] = np.inf
        per_row = -2.0 * (lppd - p_waic)
    return float(per_row.mean()), per_row


def waic(obs: ObservationSet, fit: FitResult, rows=None, by_type: bool = False, chunk=METRIC_CHUNK):
    """WAIC over training rows, divided by the row count.

    Weibull rows can score ``+inf``: a prior draw of ``rho_z`` far from the
    data puts density ``exp(-z**rho * e**Y)`` below the double range, so the
    log-density variance is unbounded.  That is reported, not clipped.
    """
    if fit.T < 2:
        raise ValueError("WAIC needs at least two replicates")
    rows = observed_rows(obs, holdout=False) if rows is None else np.asarray(rows)
    per_row = np.empty(len(rows))
    for c, start in enumerate(range(0, len(rows), chunk)):
        sl = slice(start, start + chunk)
        per_row[sl] = waic_from_log_density(log_density_matrix(fit, obs, rows[sl], chunk_id=c))[1]
    if np.any(np.isnan(per_row)):
        raise ValueError("undefined WAIC terms")
    pooled, per = _split(per_row, _row_types(fit, rows), fit.K)
    return (pooled, per) if by_type else pooled


@dataclass
class ScoreReport:
    """Pooled and per-type scores plus run metadata."""

    pooled: dict[str, float]
    per_type: dict[str, np.ndarray]
    n: int
    T: int
    seed: int
    timings: dict[str, float] = field(default_factory=dict)

    def table(self) -> list[dict]:
        """One row per scope (``pooled``, ``type1``, ...) with the six score columns."""
        K = len(next(iter(self.per_type.values()))) if self.per_type else 0
        rows = [{"scope": "pooled", **{k: self.pooled.get(k, np.nan) for k in SCORE_NAMES}}]
        for k in range(K):
            rows.append({"scope": f"type{k + 1}",
                         **{name: float(self.per_type[name][k]) if name in self.per_type else np.nan
                            for name in SCORE_NAMES}})
        return rows


def score_fit(fit: FitResult, obs: ObservationSet, *, true_latent=None, true_beta=None,
              true_eta=None, n_used: int | None = None) -> ScoreReport:
    """Every available score; truth-based scores are skipped when truth is absent."""
    pooled, per, clock = {}, {}, {}
    hold = observed_rows(obs, holdout=True)

    def timed(name, fn):
        t0 = time.perf_counter()
        out = fn()
        clock[name] = time.perf_counter() - t0
        return out

    if true_latent is not None:
        mspe_rows = (np.arange(fit.K)[:, None] * fit.n_sites + obs.holdout_positions()[None, :]).ravel()
        pooled["MSPE"], per["MSPE"] = timed("MSPE", lambda: mspe(true_latent, fit, mspe_rows, by_type=True))
    if true_beta is not None and true_eta is not None:
        truth = np.concatenate([np.ravel(true_beta), np.ravel(true_eta)])
        pooled["MSE"] = timed("MSE", lambda: mse_coeffs(true_beta, true_eta, fit))
        est = fit.gamma.mean(axis=0)
        per["MSE"] = np.array([np.mean((truth - est)[coefficient_type_mask(fit, k)] ** 2)
                               for k in range(1, fit.K + 1)])
    if len(hold):
        pooled["HOVE"], per["HOVE"] = timed("HOVE", lambda: hove(obs, fit, hold, by_type=True))
        if fit.T >= 2:
            rows, pm, cr = timed("PMCC+CRPS", lambda: predictive_scores(fit, obs, hold))
            types = _row_types(fit, rows)
            pooled["PMCC"], per["PMCC"] = _split(pm, types, fit.K)
            pooled["CRPS"], per["CRPS"] = _split(cr, types, fit.K)
    if fit.T >= 2:
        pooled["WAIC"], per["WAIC"] = timed("WAIC", lambda: waic(obs, fit, by_type=True))
    for name, value in pooled.items():
        if name != "WAIC" and not np.isfinite(value):
            raise ValueError(f"score {name} is not finite")
    n = n_used if n_used is not None else (fit.config.n or len(obs.nonholdout_positions()))
    return ScoreReport(pooled, per, n=n, T=fit.T, seed=fit.config.seed, timings=clock)


@dataclass
class ElbowTable:
    """One row per subset size: the per-type metric and the fit's wall time."""

    metric: str
    n: np.ndarray
    values: np.ndarray
    wall: np.ndarray

    def rows(self) -> list[dict]:
        out = []
        for i, n in enumerate(self.n):
            row = {"n": int(n)}
            row.update({f"{self.metric}_type{k + 1}": float(v) for k, v in enumerate(self.values[i])})
            row["wall_seconds"] = float(self.wall[i])
            out.append(row)
        return out


def elbow_scan(obs: ObservationSet, cfg: FitConfig, n_grid, true_latent=None) -> ElbowTable:
    """One fit per subset size with a shared seed; MSPE if truth is given, else HOVE."""
    metric = "MSPE" if true_latent is not None else "HOVE"
    N = len(obs.nonholdout_positions())
    values, walls = [], []
    grid = [int(n) for n in n_grid]
    for n in grid:
        if not 1 <= n <= N:
            raise ValueError(f"elbow grid value n={n} outside [1, {N}]")
        run_cfg = dataclasses.replace(cfg, n=n, mode="srs", summarize_latent=False,
                                      store_replicates=False)
        try:
            t0 = time.perf_counter()
            fit = run_fit(obs, run_cfg)
            wall = time.perf_counter() - t0
        except Exception as exc:
            raise type(exc)(f"elbow fit at n={n} failed: {exc}") from exc
        if true_latent is not None:
            rows = (np.arange(fit.K)[:, None] * fit.n_sites + obs.holdout_positions()[None, :]).ravel()
            values.append(mspe(true_latent, fit, rows, by_type=True)[1])
        else:
            values.append(hove(obs, fit, by_type=True)[1])
        walls.append(wall)
    return ElbowTable(metric, np.array(grid), np.array(values), np.array(walls))
