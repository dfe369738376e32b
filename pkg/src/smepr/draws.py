"""Random draws: hyperparameters, conjugate pseudo-data, Gaussian blocks, predictive data.

Every draw takes an explicit ``numpy.random.Generator``.  Generators come
from :class:`RngStream`, a (seed, stream_id) pair over the counter-based
Philox bit generator, so a replicate's draws depend only on its stream and
never on execution order or thread count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, expit, gammaln

from .core import FamilyKind, HyperpriorConfig

MAX_RESAMPLE = 100


class NumericError(ArithmeticError):
    """A draw or transform left the representable range."""


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self, *subkeys: int) -> np.random.Generator:
        """Independent generator for ``(seed, stream_id, *subkeys)``."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *map(int, subkeys)))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ThetaDraw:
    """One draw of the hyperparameters.

    ``row_sigma2`` holds one variance per subset row, NaN on rows whose
    family does not use it.
    """

    sigma2_xi: float
    sigma2_beta: float
    sigma2_eta: float
    rho_xi: float
    rho_beta: float
    rho_eta: float
    rho_z: float
    row_sigma2: np.ndarray

    SCALARS = ("sigma2_xi", "sigma2_beta", "sigma2_eta", "rho_xi", "rho_beta", "rho_eta", "rho_z")

    def scalars(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.SCALARS])


def inv_gamma(shape, scale, rng: np.random.Generator, size=None):
    """IG(shape, scale) draws: ``scale / Gamma(shape, rate 1)``."""
    return scale / rng.standard_gamma(shape, size)


def _guarded(name, sampler):
    for _ in range(MAX_RESAMPLE):
        with np.errstate(over="ignore", divide="ignore"):
            value = sampler()
        if np.all(np.isfinite(value)) and np.all(value > 0):
            return value
    raise NumericError(f"prior for {name} produced non-finite values {MAX_RESAMPLE} times")


def draw_theta(cfg: HyperpriorConfig, rng: np.random.Generator,
               row_scale_mask=None) -> ThetaDraw:
    """Draw theta from its prior; row variances only where ``row_scale_mask`` is set."""
    rho_xi = _guarded("rho_xi", lambda: rng.gamma(cfg.rho_xi_shape, 1.0 / cfg.rho_xi_rate))
    rho_beta = _guarded("rho_beta", lambda: rng.gamma(cfg.rho_beta_shape, 1.0 / cfg.rho_beta_rate))
    rho_eta = _guarded("rho_eta", lambda: rng.gamma(cfg.rho_eta_shape, 1.0 / cfg.rho_eta_rate))
    s_xi = _guarded("sigma2_xi", lambda: inv_gamma(cfg.sigma2_xi_shape, rho_xi, rng))
    s_beta = _guarded("sigma2_beta", lambda: inv_gamma(cfg.sigma2_beta_shape, rho_beta, rng))
    s_eta = _guarded("sigma2_eta", lambda: inv_gamma(cfg.sigma2_eta_shape, rho_eta, rng))
    rho_z = _guarded("rho_z", lambda: inv_gamma(cfg.rho_z_shape, cfg.rho_z_scale, rng))
    mask = np.zeros(0, bool) if row_scale_mask is None else np.asarray(row_scale_mask, bool)
    row = np.full(mask.shape, np.nan)
    if mask.any():
        row[mask] = _guarded("sigma2_i", lambda: inv_gamma(cfg.sigma2_row_shape, cfg.sigma2_row_scale,
                                                           rng, int(mask.sum())))
    return ThetaDraw(float(s_xi), float(s_beta), float(s_eta), float(rho_xi), float(rho_beta),
                     float(rho_eta), float(rho_z), row)


def _log_beta_ratio(a, b, rng, size):
    """``log(B / (1 - B))`` for ``B ~ Beta(a, b)``, via two gamma variates."""
    ga = rng.standard_gamma(a, size)
    gb = rng.standard_gamma(b, size)
    with np.errstate(divide="ignore"):
        return np.log(ga) - np.log(gb)


def draw_pseudo_data(family: FamilyKind, z, rng: np.random.Generator, *, rho_z=1.0,
                     row_sigma2=None, trials=1) -> np.ndarray:
    """Conjugate pseudo-data ``y_rep`` for the rows ``z`` of one family.

    LogitBeta: ``z + sigma_i * logit(Beta(alpha_z, kappa_z - alpha_z))``.
    Weibull: ``log Gamma(1, rate z**rho_z)``, evaluated in log space.
    Gaussian: ``Normal(z, sigma_i^2)``.  Poisson: ``log Gamma(z + alpha_xi, 1)``.
    Binomial: ``logit Beta(z + alpha_xi, m + alpha_xi - z)``.
    """
    z = np.asarray(z, dtype=float)
    n = z.shape
    tag = family.tag
    if tag == "logitbeta":
        sigma = np.sqrt(np.asarray(row_sigma2, dtype=float))
        out = z + sigma * _log_beta_ratio(family.alpha_z, family.kappa_z - family.alpha_z, rng, n)
    elif tag == "weibull":
        g = rng.standard_gamma(1.0, n)
        with np.errstate(divide="ignore"):
            out = np.log(g) - rho_z * np.log(z)
    elif tag == "gaussian":
        out = z + np.sqrt(np.asarray(row_sigma2, dtype=float)) * rng.standard_normal(n)
    elif tag == "poisson":
        with np.errstate(divide="ignore"):
            out = np.log(rng.standard_gamma(z + family.alpha_xi, n))
    else:
        a = z + family.alpha_xi
        b = np.asarray(trials, dtype=float) + 2.0 * family.alpha_xi - a
        out = _log_beta_ratio(a, b, rng, n)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite {tag} pseudo-data")
    return out


def draw_pseudo_datum(family: FamilyKind, z: float, theta: ThetaDraw, rng, *, sigma2=None, trials=1):
    """Scalar convenience wrapper around :func:`draw_pseudo_data`."""
    s2 = sigma2 if sigma2 is not None else (theta.row_sigma2[0] if theta.row_sigma2.size else np.nan)
    return float(draw_pseudo_data(family, np.array([z]), rng, rho_z=theta.rho_z,
                                  row_sigma2=np.array([s2]), trials=np.array([trials]))[0])


def draw_gaussian_blocks(theta: ThetaDraw, p: int, r: int, kn: int, rng: np.random.Generator):
    """``(w_beta, w_eta, w_xi)`` with variances ``sigma2_beta``, ``sigma2_eta``, ``sigma2_xi``."""
    w_beta = np.sqrt(theta.sigma2_beta) * rng.standard_normal(p)
    w_eta = np.sqrt(theta.sigma2_eta) * rng.standard_normal(r)
    w_xi = np.sqrt(theta.sigma2_xi) * rng.standard_normal(kn)
    return w_beta, w_eta, w_xi


def draw_predictive(family: FamilyKind, Y, rng: np.random.Generator, *, rho_z=1.0,
                    row_sigma2=None, trials=1, replicate=None) -> np.ndarray:
    """New responses given latent values ``Y`` (natural-parameter scale)."""
    Y = np.asarray(Y, dtype=float)
    shape = Y.shape
    tag = family.tag
    with np.errstate(over="ignore"):
        if tag == "logitbeta":
            sigma = np.sqrt(np.asarray(row_sigma2, dtype=float))
            out = Y + sigma * _log_beta_ratio(family.alpha_z, family.kappa_z - family.alpha_z, rng, shape)
        elif tag == "weibull":
            # Z**rho * exp(Y) ~ Exp(1)
            out = np.exp((np.log(rng.standard_gamma(1.0, shape)) - Y) / rho_z)
        elif tag == "gaussian":
            out = Y + np.sqrt(np.asarray(row_sigma2, dtype=float)) * rng.standard_normal(shape)
        elif tag == "poisson":
            lam = np.exp(Y)
            if not np.all(np.isfinite(lam)):
                raise NumericError(_where("Poisson mean exp(Y) overflowed", replicate))
            out = rng.poisson(lam).astype(float)
        else:
            out = rng.binomial(np.broadcast_to(np.asarray(trials, dtype=np.int64), shape),
                               expit(Y)).astype(float)
    if not np.all(np.isfinite(out)):
        raise NumericError(_where(f"non-finite {tag} predictive draw", replicate))
    return out


def log_density(family: FamilyKind, z, Y, *, rho_z=1.0, row_sigma2=None, trials=1) -> np.ndarray:
    """Pointwise log pdf/pmf of ``z`` given latent ``Y``."""
    z = np.asarray(z, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if not np.all(family.in_domain(z, trials)):
        raise ValueError(f"response outside the {family.tag} domain")
    tag = family.tag
    if tag == "logitbeta":
        s2 = np.asarray(row_sigma2, dtype=float)
        u = (z - Y) / np.sqrt(s2)
        a, k = family.alpha_z, family.kappa_z
        return a * u - k * np.logaddexp(0.0, u) - betaln(a, k - a) - 0.5 * np.log(s2)
    if tag == "weibull":
        with np.errstate(over="ignore"):
            return np.log(rho_z) + (rho_z - 1.0) * np.log(z) + Y - np.exp(rho_z * np.log(z) + Y)
    if tag == "gaussian":
        s2 = np.asarray(row_sigma2, dtype=float)
        return -0.5 * np.log(2 * np.pi * s2) - (z - Y) ** 2 / (2 * s2)
    if tag == "poisson":
        with np.errstate(over="ignore"):
            return z * Y - np.exp(Y) - gammaln(z + 1.0)
    m = np.asarray(trials, dtype=float)
    log_choose = gammaln(m + 1) - gammaln(z + 1) - gammaln(m - z + 1)
    return log_choose + z * Y - m * np.logaddexp(0.0, Y)


def _where(msg, replicate):
    return msg if replicate is None else f"{msg} (replicate {replicate})"


__all__ = [
    "NumericError", "RngStream", "ThetaDraw", "inv_gamma", "draw_theta", "draw_pseudo_data",
    "draw_pseudo_datum", "draw_gaussian_blocks", "draw_predictive", "log_density",
]
