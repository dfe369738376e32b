"""Composite sampler: independent posterior replicates by subset draw, prior draw and projection.

Replicate ``t`` uses only the stream ``(seed, t)``: it draws a site subset,
a hyperparameter vector from the prior, conjugate pseudo-data for the subset
rows and Gaussian blocks, then projects.  Replicates form no chain, so they
can be computed in any order and on any number of threads with bitwise
identical results.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln

from .core import DesignSpec, FamilyKind, HyperpriorConfig, ObservationSet, build_design, require_valid
from .draws import (MAX_RESAMPLE, NumericError, RngStream, ThetaDraw, draw_gaussian_blocks,
                    draw_pseudo_data, draw_theta)
from .solver import solve_gamma
from .subset import ConfigError, draw_subset, subset_rows

THETA_COLUMNS = ThetaDraw.SCALARS
CHUNK_ROWS = 4096

# sub-stream keys within one replicate's stream
_SUBSET, _THETA, _PSEUDO, _GAUSS = 0, 1, 2, 3


@dataclass
class FitConfig:
    families: tuple[FamilyKind, ...]
    design: DesignSpec
    T: int = 1000
    n: int | None = None
    mode: str = "srs"
    seed: int = 0
    hyperpriors: HyperpriorConfig = field(default_factory=HyperpriorConfig)
    store_replicates: bool = False
    quantiles: tuple[float, ...] = (0.025, 0.5, 0.975)
    threads: int = 1
    predict_stride: int = 1
    summarize_latent: bool = True

    def __post_init__(self):
        self.families = tuple(self.families)
        self.quantiles = tuple(float(q) for q in self.quantiles)
        self.mode = self.mode.lower()
        if self.T < 1:
            raise ConfigError(f"T must be at least 1, got {self.T}")
        if any(not 0 < q < 1 for q in self.quantiles):
            raise ConfigError(f"quantiles must lie in (0, 1), got {self.quantiles}")
        if self.threads < 1 or self.predict_stride < 1:
            raise ConfigError("threads and predict_stride must be positive")


@dataclass
class Summary:
    """Per-row posterior summary; ``rows`` index canonical (type, site) rows."""

    rows: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    quantile_levels: tuple[float, ...]
    quantiles: np.ndarray


@dataclass
class FitResult:
    config: FitConfig
    beta: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    latent: Summary
    coefficients: Summary
    coefficient_names: list[str]
    timings: dict[str, float]
    n_sites: int
    K: int
    design_matrix: np.ndarray = field(repr=False, default=None)
    subsets: list[np.ndarray] | None = None
    xi: list[np.ndarray] | None = None
    tau_y: list[np.ndarray] | None = None

    @property
    def T(self) -> int:
        return self.beta.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        return np.hstack([self.beta, self.eta])

    def theta_column(self, name: str) -> np.ndarray:
        return self.theta[:, THETA_COLUMNS.index(name)]

    def row_type(self, rows) -> np.ndarray:
        return np.asarray(rows) // self.n_sites + 1

    def latent_replicates(self, rows) -> np.ndarray:
        """``Y = x'beta + g'eta`` for canonical ``rows``, shape ``(len(rows), T)``."""
        return self.design_matrix[np.asarray(rows)] @ self.gamma.T


class _Problem:
    """Read-only arrays shared by every replicate."""

    def __init__(self, obs: ObservationSet, cfg: FitConfig):
        self.obs = obs
        self.cfg = cfg
        X, G = build_design(obs, cfg.design)
        self.p, self.r = X.shape[1], G.shape[1]
        self.M = np.ascontiguousarray(np.hstack([X, G]))
        self.S, self.K = obs.n_sites, obs.K
        self.z = obs.canonical_z()
        self.trials = obs.canonical_trials()
        self.frame = obs.nonholdout_positions()
        N = len(self.frame)
        if N == 0:
            raise ConfigError("no non-holdout sites to fit")
        if cfg.mode == "all":
            self.n = N
        else:
            self.n = N if cfg.n is None else int(cfg.n)
            if not 1 <= self.n <= N:
                raise ConfigError(f"subset size n={self.n} must satisfy 1 <= n <= N={N}")
        self.scale_mask = np.repeat([f.uses_row_scale for f in cfg.families], self.n)


def _replicate(prob: _Problem, t: int):
    cfg = prob.cfg
    stream = RngStream(cfg.seed, t)
    clock = {}
    t0 = time.perf_counter()
    delta = draw_subset(prob.frame, prob.n, cfg.mode, stream.generator(_SUBSET))
    rows = subset_rows(delta.selected, prob.S, prob.K)
    n = delta.n
    z_d = prob.z[rows]
    m_d = prob.trials[rows]
    t1 = time.perf_counter()
    clock["subset"] = t1 - t0

    for attempt in range(MAX_RESAMPLE):
        theta = draw_theta(cfg.hyperpriors, stream.generator(_THETA, attempt), prob.scale_mask)
        g = stream.generator(_PSEUDO, attempt)
        try:
            y_rep = np.concatenate([
                draw_pseudo_data(fam, z_d[k * n:(k + 1) * n], g, rho_z=theta.rho_z,
                                 row_sigma2=theta.row_sigma2[k * n:(k + 1) * n],
                                 trials=m_d[k * n:(k + 1) * n])
                for k, fam in enumerate(cfg.families)
            ])
            break
        except NumericError:
            continue
    else:
        raise NumericError(f"replicate {t}: theta draw produced non-finite pseudo-data "
                           f"{MAX_RESAMPLE} times")
    t2 = time.perf_counter()
    clock["pseudo_data"] = t2 - t1

    w_beta, w_eta, w_xi = draw_gaussian_blocks(theta, prob.p, prob.r, len(rows), stream.generator(_GAUSS))
    M_d = prob.M[rows]
    t3 = time.perf_counter()
    clock["gather"] = t3 - t2
    xi, gamma = solve_gamma(M_d, y_rep, np.concatenate([w_beta, w_eta]), w_xi)
    clock["solve"] = time.perf_counter() - t3

    extra = None
    if cfg.store_replicates:
        tau_y = xi + M_d @ gamma - y_rep
        extra = (delta.selected, xi, tau_y)
    return gamma, theta.scalars(), extra, clock


def summarize_rows(values_fn, rows, quantiles, chunk=CHUNK_ROWS) -> Summary:
    """Summaries of per-row replicate matrices produced chunk by chunk."""
    rows = np.asarray(rows)
    mean = np.empty(len(rows))
    sd = np.empty(len(rows))
    qs = np.empty((len(rows), len(quantiles)))
    for start in range(0, len(rows), chunk):
        sl = slice(start, start + chunk)
        V = values_fn(rows[sl])
        mean[sl] = V.mean(axis=1)
        sd[sl] = V.std(axis=1, ddof=1) if V.shape[1] > 1 else 0.0
        if quantiles:
            qs[sl] = np.quantile(V, quantiles, axis=1).T
    return Summary(rows, mean, sd, tuple(quantiles), qs)


def run_fit(obs: ObservationSet, cfg: FitConfig) -> FitResult:
    """Draw ``cfg.T`` independent posterior replicates and summarise them."""
    require_valid(obs, cfg.design, cfg.families)
    wall0 = time.perf_counter()
    prob = _Problem(obs, cfg)
    setup = time.perf_counter() - wall0

    def work(t):
        return _replicate(prob, t)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(work, range(cfg.T)))
    else:
        results = [work(t) for t in range(cfg.T)]
    loop = time.perf_counter() - wall0 - setup

    gamma = np.vstack([res[0] for res in results]) if prob.p + prob.r else np.zeros((cfg.T, 0))
    theta = np.vstack([res[1] for res in results])
    timings = {"setup": setup, "replicates": loop}
    for key in results[0][3]:
        timings[key] = float(sum(res[3][key] for res in results))

    t_pred = time.perf_counter()
    pred_rows = np.arange(0, prob.K * prob.S, cfg.predict_stride) if cfg.summarize_latent \
        else np.zeros(0, dtype=np.int64)
    latent = summarize_rows(lambda rr: prob.M[rr] @ gamma.T, pred_rows, cfg.quantiles)
    coef = summarize_rows(lambda rr: gamma.T[rr], np.arange(gamma.shape[1]), cfg.quantiles)
    timings["summaries"] = time.perf_counter() - t_pred
    timings["wall"] = time.perf_counter() - wall0

    fit = FitResult(
        config=cfg, beta=gamma[:, :prob.p], eta=gamma[:, prob.p:], theta=theta, latent=latent,
        coefficients=coef, coefficient_names=cfg.design.beta_names() + cfg.design.eta_names(),
        timings=timings, n_sites=prob.S, K=prob.K, design_matrix=prob.M,
    )
    if cfg.store_replicates:
        fit.subsets = [res[2][0] for res in results]
        fit.xi = [res[2][1] for res in results]
        fit.tau_y = [res[2][2] for res in results]
    return fit


def weibull_mean_transform(Y, rho_z):
    """Predictive mean ``exp(-Y / rho) * Gamma(1 + 1/rho)`` of the rate-form Weibull."""
    Y = np.asarray(Y, dtype=float)
    rho_z = np.asarray(rho_z, dtype=float)
    if np.any(rho_z <= 0):
        raise ValueError("Weibull shape must be positive")
    with np.errstate(over="ignore"):
        out = np.exp(-Y / rho_z + gammaln(1.0 + 1.0 / rho_z))
    if not np.all(np.isfinite(out)):
        raise NumericError("Weibull mean transform overflowed")
    return out


def response_mean(family: FamilyKind, Y, rho_z=1.0, trials=1):
    """Conditional mean of the response given latent ``Y`` (replicate-wise)."""
    tag = family.tag
    if tag in ("gaussian", "logitbeta"):
        return np.asarray(Y, dtype=float)
    if tag == "poisson":
        with np.errstate(over="ignore"):
            out = np.exp(Y)
        if not np.all(np.isfinite(out)):
            raise NumericError("Poisson mean exp(Y) overflowed")
        return out
    if tag == "binomial":
        return np.asarray(trials, dtype=float) * expit(Y)
    return weibull_mean_transform(Y, rho_z)


def predict(fit: FitResult, obs: ObservationSet, which: str = "latent", rows=None) -> Summary:
    """Per-(site, type) summaries of the latent process or of the response mean."""
    if rows is None:
        rows = np.arange(fit.K * fit.n_sites)
    rows = np.asarray(rows)
    if which == "latent":
        return summarize_rows(fit.latent_replicates, rows, fit.config.quantiles)
    if which != "response_mean":
        raise ValueError(f"unknown prediction target {which!r}")
    trials = obs.canonical_trials()
    rho = fit.theta_column("rho_z")[None, :]
    families = fit.config.families

    def values(rr):
        Y = fit.latent_replicates(rr)
        out = np.empty_like(Y)
        types = fit.row_type(rr)
        for k, fam in enumerate(families):
            sel = types == k + 1
            if sel.any():
                out[sel] = response_mean(fam, Y[sel], rho, trials[rr[sel]][:, None])
        return out

    return summarize_rows(values, rows, fit.config.quantiles)
