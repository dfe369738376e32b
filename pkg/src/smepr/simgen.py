"""Synthetic studies on the 1-D domain ``{1, ..., M}``.

``biv``: a logistic response (scale 0.6) and an exponential response whose
minus-log mean depends on the first response, with 15 individual Gaussian
RBFs per type plus 15 shared ones.  ``gauss``, ``pois``, ``bern``:
univariate responses over 30 RBFs.  In every study 20% of the sites are held
out, and a study can be fitted with a different basis count than generated
it (the misspecification setting).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .basis import build_basis_matrix, rbf_block_1d
from .core import INTERCEPT, DesignSpec, FamilyKind, ObservationSet
from .draws import RngStream

STUDIES = ("biv", "gauss", "pois", "bern")

# (intercept, x1, x2) coefficients, eta mean, eta variance, xi variance
_UNIVARIATE = {
    "gauss": ((2.5, -0.5, -2.0), 0.0, 0.81, 0.07),
    "pois": ((-1.0, -0.4, -1.2), 0.2, 0.04, 0.01),
    "bern": ((-5.0, 1.0, -1.0), 0.2, 0.04, 0.01),
}
_GAUSS_NOISE_VAR = 0.25
_LOGISTIC_SCALE = 0.6


@dataclass(frozen=True)
class StudySpec:
    study: str
    M: int
    seed: int = 0
    observe_frac: float = 0.8
    basis_true: tuple[int, int] | None = None
    basis_fit: tuple[int, int] | None = None

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}; expected one of {STUDIES}")
        if not 0 < self.observe_frac < 1:
            raise ValueError("observe_frac must lie in (0, 1)")
        true = self.basis_true or ((15, 15) if self.study == "biv" else (30, 0))
        object.__setattr__(self, "basis_true", tuple(true))
        object.__setattr__(self, "basis_fit", tuple(self.basis_fit or true))
        if self.M < max(self.basis_true + self.basis_fit) or self.M < 2:
            raise ValueError("M must be at least the number of knots")


@dataclass(frozen=True)
class SimulatedStudy:
    """Dataset plus the truth that generated it, in canonical row order."""

    spec: StudySpec
    obs: ObservationSet
    families: tuple[FamilyKind, ...]
    design: DesignSpec
    true_latent: np.ndarray
    true_signal: np.ndarray
    true_beta: np.ndarray
    true_eta: np.ndarray
    true_xi: np.ndarray


def draw_covariates(M: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Bernoulli covariates with success probabilities ``expit(s/M)`` and ``expit(-0.01 s/M)``."""
    s = np.arange(1, M + 1, dtype=float)
    x1 = (rng.random(M) < expit(s / M)).astype(float)
    x2 = (rng.random(M) < expit(-0.01 * s / M)).astype(float)
    return x1, x2


def _blocks(M, counts, K):
    individual, shared = counts
    blocks = []
    if K == 1:
        return (rbf_block_1d(1, M, individual, scope=1, name="basis"),)
    for k in range(1, K + 1):
        blocks.append(rbf_block_1d(1, M, individual, scope=k, name=f"ind{k}"))
    if shared:
        blocks.append(rbf_block_1d(1, M, shared, scope=None, name="shared"))
    return tuple(blocks)


def generate(spec: StudySpec) -> SimulatedStudy:
    rng = RngStream(spec.seed, 0).generator()
    M = spec.M
    s = np.arange(1, M + 1, dtype=float)
    x1, x2 = draw_covariates(M, rng)
    K = 2 if spec.study == "biv" else 1
    true_blocks = _blocks(M, spec.basis_true, K)
    G = build_basis_matrix(s, true_blocks, K)

    if spec.study == "biv":
        ni, ns = spec.basis_true
        eta1 = rng.normal(0.0, np.sqrt(0.81), ni)
        eta2 = rng.normal(0.0, np.sqrt(0.04), ni)
        eta_m = rng.normal(0.0, np.sqrt(0.81), ns)
        eta = np.concatenate([eta1, eta2, eta_m])
        xi = np.concatenate([rng.normal(0.0, np.sqrt(0.15), M), rng.normal(0.0, np.sqrt(0.08), M)])
        signal1 = 1.0 - 2.0 * x1 - 2.0 * x2 + G[:M] @ eta
        y1 = signal1 + xi[:M]
        z1 = y1 + _LOGISTIC_SCALE * rng.logistic(0.0, 1.0, M)
        signal2 = -0.7 - 1.5 * x1 - x2 - 0.25 * z1 + G[M:] @ eta
        y2 = signal2 + xi[M:]
        # exponential with mean exp(-y2): rate exp(y2)
        z2 = rng.standard_exponential(M) * np.exp(-y2)
        z = np.concatenate([z1, z2])
        beta = np.array([1.0, -2.0, -2.0, -0.7, -1.5, -1.0, -0.25])
        signal = np.concatenate([signal1, signal2])
        families = (FamilyKind("logitbeta", 1.0, 2.0), FamilyKind("weibull"))
        covariates = ((INTERCEPT, "x1", "x2"), (INTERCEPT, "x1", "x2", "response:1"))
    else:
        coefs, eta_mean, eta_var, xi_var = _UNIVARIATE[spec.study]
        eta = rng.normal(eta_mean, np.sqrt(eta_var), spec.basis_true[0])
        xi = rng.normal(0.0, np.sqrt(xi_var), M)
        beta = np.array(coefs)
        signal = beta[0] + beta[1] * x1 + beta[2] * x2 + G @ eta
        y = signal + xi
        if spec.study == "gauss":
            z = y + rng.normal(0.0, np.sqrt(_GAUSS_NOISE_VAR), M)
            families = (FamilyKind("gaussian"),)
        elif spec.study == "pois":
            z = rng.poisson(np.exp(y)).astype(float)
            families = (FamilyKind("poisson"),)
        else:
            z = (rng.random(M) < expit(y)).astype(float)
            families = (FamilyKind("binomial"),)
        covariates = ((INTERCEPT, "x1", "x2"),)

    n_hold = M - int(round(spec.observe_frac * M))
    holdout = np.zeros(M, dtype=bool)
    holdout[rng.choice(M, size=n_hold, replace=False)] = True

    site_ids = np.arange(1, M + 1)
    obs = ObservationSet(
        site_ids=site_ids, coords=s[:, None], holdout=holdout, K=K,
        row_site=np.tile(site_ids, K), row_type=np.repeat(np.arange(1, K + 1), M), row_z=z,
        covariates={"x1": x1, "x2": x2},
    )
    design = DesignSpec(covariates, _blocks(M, spec.basis_fit, K))
    return SimulatedStudy(spec, obs, families, design, signal + xi, signal, beta, eta, xi)
