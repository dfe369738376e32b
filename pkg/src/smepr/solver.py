"""Least-squares projection that turns one stacked pseudo-data draw into a posterior replicate.

With ``M = [X_d G_d]`` and ``gamma = (beta, eta)`` the replicate
``(xi, gamma) = (H'H)^{-1} H' w`` minimises

    ||xi + M gamma - y||^2 + ||gamma - w_gamma||^2 + ||xi - w_xi||^2 .

Eliminating ``xi`` leaves the ``(p+r)``-dimensional SPD system

    (I + M'M / 2) gamma = w_gamma + M'(y - w_xi) / 2,    xi = (y + w_xi - M gamma) / 2,

so a replicate costs ``O(Kn (p+r)^2 + (p+r)^3)`` and the orthogonal
complement of ``H`` is never formed.  :func:`dense_oracle_solve` builds
``H`` and its complement explicitly for testing at small sizes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .draws import ThetaDraw

ORACLE_MAX_ROWS = 2000


@dataclass(frozen=True)
class StackedDraw:
    y_rep: np.ndarray
    w_beta: np.ndarray
    w_eta: np.ndarray
    w_xi: np.ndarray
    theta: ThetaDraw | None = None

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.y_rep, self.w_beta, self.w_eta, self.w_xi])

    def _scale(self, attr):
        return 1.0 if self.theta is None else float(np.sqrt(getattr(self.theta, attr)))


@dataclass(frozen=True)
class ReplicateSolution:
    xi: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    tau_y: np.ndarray
    tau_xi: np.ndarray
    tau_beta: np.ndarray
    tau_eta: np.ndarray
    residual: np.ndarray

    @property
    def zeta(self) -> np.ndarray:
        return np.concatenate([self.xi, self.beta, self.eta])


@dataclass(frozen=True)
class OracleSolution(ReplicateSolution):
    H: np.ndarray = None
    Q: np.ndarray = None
    q: np.ndarray = None


def _check_inputs(X, G, draw):
    X = np.asarray(X, dtype=float)
    G = np.asarray(G, dtype=float)
    kn = len(draw.y_rep)
    if X.ndim != 2 or G.ndim != 2 or X.shape[0] != kn or G.shape[0] != kn:
        raise ValueError(f"design rows must match {kn} pseudo-data rows")
    if len(draw.w_beta) != X.shape[1] or len(draw.w_eta) != G.shape[1] or len(draw.w_xi) != kn:
        raise ValueError("stacked draw blocks do not match (Kn, p, r)")
    for name, a in (("X", X), ("G", G), ("w", draw.stacked())):
        if not np.all(np.isfinite(a)):
            raise ValueError(f"non-finite entries in {name}")
    return X, G


def solve_gamma(M: np.ndarray, y_rep, w_gamma, w_xi) -> tuple[np.ndarray, np.ndarray]:
    """Core reduced solve on the combined design ``M``; returns ``(xi, gamma)``."""
    q = M.shape[1]
    u = y_rep - w_xi
    if q:
        A = M.T @ M
        A *= 0.5
        A[np.diag_indices(q)] += 1.0
        rhs = w_gamma + 0.5 * (M.T @ u)
        gamma = sla.cho_solve(sla.cho_factor(A, lower=True, check_finite=False), rhs,
                              check_finite=False)
        fitted = M @ gamma
    else:
        gamma = np.zeros(0)
        fitted = np.zeros_like(y_rep)
    xi = 0.5 * (y_rep + w_xi - fitted)
    return xi, gamma


def _assemble(X, G, draw, xi, beta, eta, cls=ReplicateSolution, **extra):
    fitted = xi + X @ beta + G @ eta
    tau_y = fitted - draw.y_rep
    r_beta = draw.w_beta - beta
    r_eta = draw.w_eta - eta
    r_xi = draw.w_xi - xi
    residual = np.concatenate([-tau_y, r_beta, r_eta, r_xi])
    return cls(
        xi=xi, beta=beta, eta=eta, tau_y=tau_y,
        tau_xi=-r_xi / draw._scale("sigma2_xi"),
        tau_beta=-r_beta / draw._scale("sigma2_beta"),
        tau_eta=-r_eta / draw._scale("sigma2_eta"),
        residual=residual, **extra,
    )


def solve_projection(X_d, G_d, draw: StackedDraw) -> ReplicateSolution:
    """Posterior replicate ``(xi, beta, eta)`` and discrepancy terms for one stacked draw."""
    X, G = _check_inputs(X_d, G_d, draw)
    p = X.shape[1]
    M = np.hstack([X, G])
    xi, gamma = solve_gamma(M, draw.y_rep, np.concatenate([draw.w_beta, draw.w_eta]), draw.w_xi)
    return _assemble(X, G, draw, xi, gamma[:p], gamma[p:])


def build_H(X_d, G_d) -> np.ndarray:
    """Dense ``H = [I X G; 0 I 0; 0 0 I; I 0 0]``, shape ``(2Kn+p+r, Kn+p+r)``."""
    X_d = np.asarray(X_d, float)
    G_d = np.asarray(G_d, float)
    kn, p = X_d.shape
    r = G_d.shape[1]
    H = np.zeros((2 * kn + p + r, kn + p + r))
    H[:kn, :kn] = np.eye(kn)
    H[:kn, kn:kn + p] = X_d
    H[:kn, kn + p:] = G_d
    H[kn:kn + p, kn:kn + p] = np.eye(p)
    H[kn + p:kn + p + r, kn + p:] = np.eye(r)
    H[kn + p + r:, :kn] = np.eye(kn)
    return H


def dense_oracle_solve(X_d, G_d, draw: StackedDraw) -> OracleSolution:
    """Reference replicate from the explicit ``H``, its complement ``Q`` and ``q = Q'w``."""
    X, G = _check_inputs(X_d, G_d, draw)
    kn, p = X.shape
    r = G.shape[1]
    rows = 2 * kn + p + r
    if rows > ORACLE_MAX_ROWS:
        raise ValueError(f"dense oracle refuses {rows} rows (cap {ORACLE_MAX_ROWS})")
    H = build_H(X, G)
    w = draw.stacked()
    zeta, *_ = np.linalg.lstsq(H, w, rcond=None)
    Q = sla.null_space(H.T)
    q = Q.T @ w
    return _assemble(X, G, draw, zeta[:kn], zeta[kn:kn + p], zeta[kn + p:], cls=OracleSolution,
                     H=H, Q=Q, q=q)


def hat_matrix(X_d, G_d) -> np.ndarray:
    H = build_H(X_d, G_d)
    return H @ np.linalg.solve(H.T @ H, H.T)


def cross_cov_formula(X_d, G_d, sigma_w) -> np.ndarray:
    """Cross-covariance of the fitted subset signal and its discrepancy, ``-J P S (I-P) J'``."""
    S = np.asarray(sigma_w, dtype=float)
    X_d = np.asarray(X_d, float)
    kn = X_d.shape[0]
    P = hat_matrix(X_d, G_d)
    if S.shape != P.shape:
        raise ValueError(f"covariance must be {P.shape}, got {S.shape}")
    if not np.allclose(S, S.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(S).max())):
        raise ValueError("covariance of w must be symmetric")
    PJ = P[:kn]
    IminusP_J = np.eye(P.shape[0])[:, :kn] - P[:, :kn]
    return -PJ @ S @ IminusP_J
