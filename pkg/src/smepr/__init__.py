"""MCMC-free posterior replicates for multi-type spatial GLMMs.

Each replicate draws a subset of training sites and a hyperparameter vector,
turns the subset responses into conjugate pseudo-data, and projects it onto
the fixed and random effects by least squares.  Replicates are independent.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .basis import BasisBlock, bisquare_block_2d, build_basis_matrix, rbf_block_1d
from .core import (DataError, DesignSpec, FamilyKind, HyperpriorConfig, ObservationSet, build_design,
                   validate_dataset)
from .draws import NumericError, RngStream, ThetaDraw, draw_predictive, draw_pseudo_data, draw_theta, log_density
from .metrics import (ScoreReport, crps_empirical, elbow_scan, hove, mse_coeffs, mspe, pmcc, score_fit,
                      waic)
from .sampler import FitConfig, FitResult, predict, response_mean, run_fit, weibull_mean_transform
from .simgen import StudySpec, generate
from .solver import cross_cov_formula, dense_oracle_solve, solve_projection
from .subset import ConfigError, draw_subset

__all__ = [
    "BasisBlock", "bisquare_block_2d", "build_basis_matrix", "rbf_block_1d",
    "DataError", "DesignSpec", "FamilyKind", "HyperpriorConfig", "ObservationSet", "build_design",
    "validate_dataset", "NumericError", "RngStream", "ThetaDraw", "draw_predictive", "draw_pseudo_data",
    "draw_theta", "log_density", "ScoreReport", "crps_empirical", "elbow_scan", "hove", "mse_coeffs",
    "mspe", "pmcc", "score_fit", "waic", "FitConfig", "FitResult", "predict", "response_mean", "run_fit",
    "weibull_mean_transform", "StudySpec", "generate", "cross_cov_formula", "dense_oracle_solve",
    "solve_projection", "ConfigError", "draw_subset",
]
