"""Site-level subset draws and gathering of subset design rows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODES = ("srs", "all")


class ConfigError(ValueError):
    """Run configuration is invalid (subset size, mode, counts)."""


@dataclass(frozen=True)
class SubsetDraw:
    """Selected site positions (sorted, into ``ObservationSet.site_ids``)."""

    selected: np.ndarray
    mode: str

    @property
    def n(self) -> int:
        return len(self.selected)


def draw_subset(frame: np.ndarray, n: int, mode: str, rng: np.random.Generator | None) -> SubsetDraw:
    """Simple random sample of ``n`` sites from ``frame`` without replacement, or all of them."""
    frame = np.asarray(frame)
    N = len(frame)
    mode = mode.lower()
    if mode not in MODES:
        raise ConfigError(f"unknown subset mode {mode!r}; expected one of {MODES}")
    if mode == "all":
        return SubsetDraw(np.sort(frame), mode)
    if not 1 <= n <= N:
        raise ConfigError(f"subset size n={n} must satisfy 1 <= n <= N={N}")
    picked = rng.choice(N, size=n, replace=False)
    return SubsetDraw(np.sort(frame[picked]), mode)


def subset_rows(selected: np.ndarray, n_sites: int, K: int) -> np.ndarray:
    """Canonical row indices of the selected sites: type blocks, sites ascending."""
    selected = np.asarray(selected, dtype=np.int64)
    return (np.arange(K, dtype=np.int64)[:, None] * n_sites + selected[None, :]).ravel()


def gather_subset(z: np.ndarray, X: np.ndarray, G: np.ndarray, delta: SubsetDraw, n_sites: int, K: int):
    """``(z_d, X_d, G_d, rows)`` for the subset; ``rows`` maps back to canonical indices.

    Canonical row ``i`` is type ``i // n_sites + 1`` at site position ``i % n_sites``.
    """
    rows = subset_rows(delta.selected, n_sites, K)
    return z[rows], X[rows], G[rows], rows
