"""Writing a fit to a directory of CSVs and reading it back."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import DataError, ObservationSet, build_design
from .io import RunConfig, RunManifest, load_config, load_observations, read_table, sha256_file, write_table
from .sampler import THETA_COLUMNS, FitConfig, FitResult, Summary

LATENT_FILE = "latent_summary.csv"
COEF_FILE = "coefficients.csv"
BETA_FILE = "beta_replicates.csv"
ETA_FILE = "eta_replicates.csv"
THETA_FILE = "theta_replicates.csv"
XI_FILE = "xi_replicates.csv"
SUBSET_FILE = "subset_replicates.csv"


def _qnames(levels):
    return [f"q{q:g}" for q in levels]


def write_summary(path, summary: Summary, obs: ObservationSet | None, n_sites=None, label="mean"):
    """Per-row summary table; rows are canonical (type, site) indices when ``obs`` is given."""
    header = ["mean", "sd", *_qnames(summary.quantile_levels)]
    if obs is None:
        return write_table(path, header, (
            [m, s, *q] for m, s, q in zip(summary.mean, summary.sd, summary.quantiles)))
    S = obs.n_sites
    d = obs.coords.shape[1]
    header = ["site_id", *[f"s{j + 1}" for j in range(d)], "type", "holdout", *header]

    def rows():
        for i, row in enumerate(summary.rows):
            j = row % S
            yield [int(obs.site_ids[j]), *obs.coords[j], int(row // S + 1), int(obs.holdout[j]),
                   summary.mean[i], summary.sd[i], *summary.quantiles[i]]

    return write_table(path, header, rows())


def excludes_zero(replicates, level=0.95) -> np.ndarray:
    """Columns whose equal-tailed ``level`` replicate interval excludes zero."""
    if replicates.shape[1] == 0:
        return np.zeros(0, dtype=bool)
    lo, hi = np.quantile(replicates, [(1 - level) / 2, (1 + level) / 2], axis=0)
    return (lo > 0) | (hi < 0)


def write_fit(fit: FitResult, obs: ObservationSet, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_summary(out / LATENT_FILE, fit.latent, obs)]
    qn = _qnames(fit.coefficients.quantile_levels)
    c = fit.coefficients
    flags = excludes_zero(fit.gamma)
    paths.append(write_table(out / COEF_FILE, ["name", "mean", "sd", *qn, "nonzero_95"],
                             ([name, m, s, *q, int(f)] for name, m, s, q, f in
                              zip(fit.coefficient_names, c.mean, c.sd, c.quantiles, flags))))
    design = fit.config.design
    paths.append(write_table(out / BETA_FILE, design.beta_names(), fit.beta))
    paths.append(write_table(out / ETA_FILE, design.eta_names(), fit.eta))
    paths.append(write_table(out / THETA_FILE, list(THETA_COLUMNS), fit.theta))
    if fit.xi is not None:
        S = fit.n_sites

        def xi_rows():
            for t, (sel, xi, tau) in enumerate(zip(fit.subsets, fit.xi, fit.tau_y)):
                rows = (np.arange(fit.K)[:, None] * S + sel[None, :]).ravel()
                for row, x, ty in zip(rows, xi, tau):
                    yield [t, int(obs.site_ids[row % S]), int(row // S + 1), x, ty]

        paths.append(write_table(out / XI_FILE, ["replicate", "site_id", "type", "xi", "tau_y"], xi_rows()))
        paths.append(write_table(out / SUBSET_FILE, ["replicate", "site_id"],
                                 ([t, int(obs.site_ids[j])] for t, sel in enumerate(fit.subsets) for j in sel)))
    return paths


def _read_matrix(path, expect_header):
    header, body = read_table(path)
    if header != list(expect_header):
        raise DataError(f"{path}: columns {header} do not match the configured design")
    if not body:
        return np.zeros((0, len(header)))
    return np.array(body, dtype=float).reshape(len(body), len(header))


def load_fit(fit_dir) -> tuple[FitResult, ObservationSet, RunManifest]:
    """Rebuild a FitResult from a fit directory, re-reading the inputs named in its manifest."""
    fit_dir = Path(fit_dir)
    man = RunManifest.read(fit_dir)
    if man.command != "fit":
        raise DataError(f"{fit_dir}: manifest is for {man.command!r}, not a fit")
    for role, info in man.inputs.items():
        if sha256_file(info["path"]) != info["sha256"]:
            raise DataError(f"input {role} ({info['path']}) changed since the fit")
    obs = load_observations(man.inputs["data"]["path"],
                            man.inputs["covariates"]["path"] if "covariates" in man.inputs else None)
    rc: RunConfig = load_config(man.inputs["config"]["path"], obs.coords)
    cfg_echo = man.config
    cfg = FitConfig(rc.families, rc.design, T=cfg_echo["T"], n=cfg_echo["n"], mode=cfg_echo["mode"],
                    seed=cfg_echo["seed"], hyperpriors=rc.hyperpriors, quantiles=rc.quantiles,
                    threads=cfg_echo.get("threads", 1), predict_stride=cfg_echo.get("predict_stride", 1))
    beta = _read_matrix(fit_dir / BETA_FILE, rc.design.beta_names())
    eta = _read_matrix(fit_dir / ETA_FILE, rc.design.eta_names())
    theta = _read_matrix(fit_dir / THETA_FILE, THETA_COLUMNS)
    if not (len(beta) == len(eta) == len(theta) == cfg.T):
        raise DataError(f"{fit_dir}: replicate files disagree on T")
    X, G = build_design(obs, rc.design)
    empty = Summary(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0), cfg.quantiles,
                    np.zeros((0, len(cfg.quantiles))))
    fit = FitResult(config=cfg, beta=beta, eta=eta, theta=theta, latent=empty, coefficients=empty,
                    coefficient_names=rc.design.beta_names() + rc.design.eta_names(),
                    timings=dict(man.timings), n_sites=obs.n_sites, K=obs.K,
                    design_matrix=np.hstack([X, G]))
    return fit, obs, man
