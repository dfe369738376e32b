"""Data model shared by every stage: families, observations, designs, priors.

Rows are always laid out in canonical order: all type-1 rows in ascending
site order, then all type-2 rows, and so on.  Row ``k * S + j`` of every
design matrix belongs to type ``k + 1`` (zero-based ``k``) at the ``j``-th
site in ascending ``site_id`` order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .basis import BasisBlock, build_basis_matrix

FAMILY_TAGS = ("logitbeta", "weibull", "gaussian", "poisson", "binomial")

INTERCEPT = "intercept"
RESPONSE_PREFIX = "response:"


class DataError(ValueError):
    """Input data or configuration is inconsistent with the model."""


@dataclass(frozen=True)
class FamilyKind:
    """Response family of one type, with its fixed constants."""

    tag: str
    alpha_z: float = 1.0
    kappa_z: float = 2.0
    alpha_xi: float = 0.5

    def __post_init__(self):
        tag = self.tag.lower()
        object.__setattr__(self, "tag", tag)
        if tag not in FAMILY_TAGS:
            raise DataError(f"unknown family {self.tag!r}; expected one of {FAMILY_TAGS}")
        if not self.alpha_z > 0 or not self.kappa_z - self.alpha_z > 0:
            raise DataError(
                f"logit-beta shapes need alpha_z > 0 and kappa_z > alpha_z, "
                f"got alpha_z={self.alpha_z}, kappa_z={self.kappa_z}"
            )
        if not self.alpha_xi > 0:
            raise DataError(f"alpha_xi must be positive, got {self.alpha_xi}")

    @property
    def uses_row_scale(self) -> bool:
        # families whose pseudo-data carry a per-row sigma_i^2
        return self.tag in ("logitbeta", "gaussian")

    def in_domain(self, z, trials=1):
        """Elementwise domain check of responses ``z``."""
        z = np.asarray(z, dtype=float)
        finite = np.isfinite(z)
        if self.tag in ("logitbeta", "gaussian"):
            return finite
        if self.tag == "weibull":
            return finite & (z > 0)
        integral = finite & (z == np.round(np.where(finite, z, 0.0)))
        if self.tag == "poisson":
            return integral & (z >= 0)
        trials = np.asarray(trials)
        return integral & (z >= 0) & (z <= trials) & (trials >= 1)


@dataclass(frozen=True)
class ObservationSet:
    """Observed rows plus site-level coordinates, covariates and holdout flags.

    ``row_*`` arrays are parallel, one entry per ``(site, type)`` row as read
    from input.  Site arrays are indexed by position in ``site_ids``, which is
    sorted ascending.
    """

    site_ids: np.ndarray
    coords: np.ndarray
    holdout: np.ndarray
    K: int
    row_site: np.ndarray
    row_type: np.ndarray
    row_z: np.ndarray
    row_trials: np.ndarray | None = None
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        site_ids = np.asarray(self.site_ids, dtype=np.int64)
        order = np.argsort(site_ids, kind="stable")
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        cov = {name: _frozen(np.asarray(v, dtype=float)[order]) for name, v in self.covariates.items()}
        n_rows = len(self.row_site)
        trials = self.row_trials
        trials = np.ones(n_rows, dtype=np.int64) if trials is None else np.asarray(trials, dtype=np.int64)
        object.__setattr__(self, "site_ids", _frozen(site_ids[order]))
        object.__setattr__(self, "coords", _frozen(coords[order]))
        object.__setattr__(self, "holdout", _frozen(np.asarray(self.holdout, dtype=bool)[order]))
        object.__setattr__(self, "row_site", _frozen(np.asarray(self.row_site, dtype=np.int64)))
        object.__setattr__(self, "row_type", _frozen(np.asarray(self.row_type, dtype=np.int64)))
        object.__setattr__(self, "row_z", _frozen(np.asarray(self.row_z, dtype=float)))
        object.__setattr__(self, "row_trials", _frozen(trials))
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "K", int(self.K))

    @property
    def n_sites(self) -> int:
        return len(self.site_ids)

    @property
    def site_position(self) -> dict[int, int]:
        return {int(s): j for j, s in enumerate(self.site_ids)}

    def nonholdout_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.holdout)

    def holdout_positions(self) -> np.ndarray:
        return np.flatnonzero(self.holdout)

    def dense(self, values: np.ndarray | None = None, fill=np.nan) -> np.ndarray:
        """Scatter a per-row quantity (default: responses) onto a ``(K, S)`` grid."""
        values = self.row_z if values is None else np.asarray(values, dtype=float)
        out = np.full((self.K, self.n_sites), fill, dtype=float)
        pos = np.searchsorted(self.site_ids, self.row_site)
        ok = (self.row_type >= 1) & (self.row_type <= self.K)
        out[self.row_type[ok] - 1, pos[ok]] = values[ok]
        return out

    def canonical_z(self) -> np.ndarray:
        """Responses in canonical order, NaN where a row is absent."""
        return self.dense().ravel()

    def canonical_trials(self) -> np.ndarray:
        return self.dense(self.row_trials, fill=1).ravel().astype(np.int64)


@dataclass(frozen=True)
class DesignSpec:
    """Column layout of the fixed-effect matrix X and the basis matrix G.

    ``covariates[k]`` lists the columns of type ``k + 1``: the literal
    ``"intercept"``, a site covariate name, or ``"response:j"`` for the
    observed type-``j`` response at the same site.  Each type gets its own
    block of X; other types' blocks are zero on its rows.
    """

    covariates: tuple[tuple[str, ...], ...]
    blocks: tuple[BasisBlock, ...] = ()
    distance: str = "planar"

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(tuple(c) for c in self.covariates))
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def K(self) -> int:
        return len(self.covariates)

    @property
    def p(self) -> int:
        return sum(len(c) for c in self.covariates)

    @property
    def r(self) -> int:
        return sum(b.width for b in self.blocks)

    def beta_names(self) -> list[str]:
        return [f"{k + 1}:{name}" for k, cols in enumerate(self.covariates) for name in cols]

    def eta_names(self) -> list[str]:
        names = []
        for b_idx, block in enumerate(self.blocks):
            scope = "shared" if block.scope is None else f"type{block.scope}"
            names.extend(f"{block.name or f'block{b_idx}'}[{scope}]:{j}" for j in range(block.width))
        return names


@dataclass(frozen=True)
class HyperpriorConfig:
    """Hyperprior constants.

    ``rho_*`` ~ Gamma(shape, rate); ``sigma2_*`` | rho ~ IG(shape, rho);
    ``rho_z`` ~ IG(shape, scale); each row's ``sigma_i^2`` ~ IG(shape, scale).
    """

    rho_xi_shape: float = 1.0
    rho_xi_rate: float = 1.0
    rho_beta_shape: float = 1.0
    rho_beta_rate: float = 1.0
    rho_eta_shape: float = 1.0
    rho_eta_rate: float = 1.0
    sigma2_xi_shape: float = 1.0
    sigma2_beta_shape: float = 1.0
    sigma2_eta_shape: float = 1.0
    rho_z_shape: float = 1.0
    rho_z_scale: float = 1.0
    sigma2_row_shape: float = 1.0
    sigma2_row_scale: float = 1.5

    def __post_init__(self):
        for name, value in vars(self).items():
            if not (np.isfinite(value) and value > 0):
                raise DataError(f"hyperprior {name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class Violation:
    message: str
    row: int | None = None
    site_id: int | None = None

    def __str__(self):
        where = []
        if self.row is not None:
            where.append(f"row {self.row}")
        if self.site_id is not None:
            where.append(f"site {self.site_id}")
        return f"{', '.join(where)}: {self.message}" if where else self.message


def validate_dataset(obs: ObservationSet, design: DesignSpec,
                     families: Sequence[FamilyKind]) -> list[Violation]:
    """Every violated invariant of ``obs`` against ``design`` and ``families``.

    An empty list means the dataset can be fitted.
    """
    out: list[Violation] = []
    K = obs.K
    if len(families) != K:
        out.append(Violation(f"{len(families)} families given for K={K} types"))
    if design.K != K:
        out.append(Violation(f"design lists covariates for {design.K} types, data has K={K}"))
    if len(np.unique(obs.site_ids)) != obs.n_sites:
        out.append(Violation("site ids are not unique"))
    if obs.coords.shape[0] != obs.n_sites or not np.all(np.isfinite(obs.coords)):
        out.append(Violation("site coordinates missing or non-finite"))

    positions = obs.site_position
    seen: dict[tuple[int, int], int] = {}
    present = np.zeros((K, obs.n_sites), dtype=bool)
    for i, (site, k, z, m) in enumerate(zip(obs.row_site, obs.row_type, obs.row_z, obs.row_trials)):
        site, k = int(site), int(k)
        if not 1 <= k <= K:
            out.append(Violation(f"type index {k} outside 1..{K}", i, site))
            continue
        if site not in positions:
            out.append(Violation("row refers to an unknown site", i, site))
            continue
        if (site, k) in seen:
            out.append(Violation(f"duplicate (site, type={k}) pair, first seen at row {seen[site, k]}",
                                 i, site))
            continue
        seen[site, k] = i
        present[k - 1, positions[site]] = True
        if k <= len(families) and not families[k - 1].in_domain(z, m):
            out.append(Violation(f"response {z} outside the {families[k - 1].tag} domain"
                                 + (f" (trials={m})" if families[k - 1].tag == "binomial" else ""),
                                 i, site))

    train = ~obs.holdout
    for k in range(K):
        missing = np.flatnonzero(train & ~present[k])
        for j in missing:
            out.append(Violation(f"type {k + 1} not observed at a non-holdout site",
                                 site_id=int(obs.site_ids[j])))

    for k, cols in enumerate(design.covariates[:K]):
        for name in cols:
            if name == INTERCEPT:
                continue
            if name.startswith(RESPONSE_PREFIX):
                try:
                    src = int(name[len(RESPONSE_PREFIX):])
                except ValueError:
                    out.append(Violation(f"bad cross-type column {name!r}"))
                    continue
                if not 1 <= src <= K:
                    out.append(Violation(f"cross-type column {name!r} names an unknown type"))
                    continue
                for j in np.flatnonzero(~present[src - 1]):
                    out.append(Violation(f"type {k + 1} uses {name!r} but it is absent",
                                         site_id=int(obs.site_ids[j])))
                continue
            if name not in obs.covariates:
                out.append(Violation(f"covariate {name!r} of type {k + 1} not supplied"))
                continue
            bad = np.flatnonzero(~np.isfinite(obs.covariates[name]))
            for j in bad:
                out.append(Violation(f"covariate {name!r} is non-finite", site_id=int(obs.site_ids[j])))

    for block in design.blocks:
        if block.scope is not None and not 1 <= block.scope <= K:
            out.append(Violation(f"basis block {block.name!r} scoped to unknown type {block.scope}"))
        if block.knots.shape[1] != obs.coords.shape[1]:
            out.append(Violation(f"basis block {block.name!r} knots are {block.knots.shape[1]}-D, "
                                 f"sites are {obs.coords.shape[1]}-D"))
    return out


def require_valid(obs, design, families):
    problems = validate_dataset(obs, design, families)
    if problems:
        shown = "; ".join(str(v) for v in problems[:10])
        more = f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""
        raise DataError(f"{len(problems)} data violation(s): {shown}{more}")


def build_covariate_matrix(obs: ObservationSet, design: DesignSpec) -> np.ndarray:
    """Full X over every (type, site) pair in canonical order, shape ``(K*S, p)``."""
    S, K = obs.n_sites, obs.K
    X = np.zeros((K * S, design.p))
    zdense = obs.dense()
    col = 0
    for k, cols in enumerate(design.covariates):
        rows = slice(k * S, (k + 1) * S)
        for name in cols:
            if name == INTERCEPT:
                X[rows, col] = 1.0
            elif name.startswith(RESPONSE_PREFIX):
                X[rows, col] = zdense[int(name[len(RESPONSE_PREFIX):]) - 1]
            else:
                X[rows, col] = obs.covariates[name]
            col += 1
    return X


def build_design(obs: ObservationSet, design: DesignSpec) -> tuple[np.ndarray, np.ndarray]:
    """Full ``(X, G)`` in canonical order."""
    X = build_covariate_matrix(obs, design)
    G = build_basis_matrix(obs.coords, design.blocks, obs.K, distance=design.distance)
    return X, G


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a
