"""Figures written next to CSV outputs (Agg backend, files only)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_elbow(table, path, title="Subset-size scan"):
    """Metric per type against subset size, plus wall time on a second axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in range(table.values.shape[1]):
        ax.plot(table.n, table.values[:, k], marker="o", label=f"type {k + 1}")
    ax.set_xlabel("subset size n")
    ax.set_ylabel(table.metric)
    ax.set_title(title)
    twin = ax.twinx()
    twin.plot(table.n, table.wall, color="0.5", linestyle="--", marker=".", label="wall time")
    twin.set_ylabel("wall time (s)")
    lines = ax.get_legend_handles_labels()
    extra = twin.get_legend_handles_labels()
    ax.legend(lines[0] + extra[0], lines[1] + extra[1], frameon=False, fontsize=8)
    return _save(fig, path)


def plot_latent(obs, summary, path, truth=None):
    """Posterior-mean latent surface per type: a band plot in 1-D, a scatter map in 2-D."""
    S = obs.n_sites
    K = obs.K
    fig, axes = plt.subplots(K, 1, figsize=(7, 3 * K), squeeze=False)
    types = summary.rows // S + 1
    lo_hi = None
    if summary.quantiles.shape[1] >= 2:
        lo_hi = (summary.quantiles[:, 0], summary.quantiles[:, -1])
    for k in range(1, K + 1):
        ax = axes[k - 1, 0]
        sel = types == k
        pos = summary.rows[sel] % S
        if obs.coords.shape[1] == 1:
            s = obs.coords[pos, 0]
            order = np.argsort(s)
            if truth is not None:
                ax.plot(s[order], np.asarray(truth)[summary.rows[sel]][order], ".", color="0.6",
                        markersize=2, label="truth")
            if lo_hi is not None:
                ax.vlines(s, lo_hi[0][sel], lo_hi[1][sel], color="C3", alpha=0.08, lw=0.5)
            ax.plot(s[order], summary.mean[sel][order], ".", color="C3", markersize=2,
                    label="posterior mean")
            ax.set_xlabel("s")
            ax.legend(frameon=False, fontsize=8)
        else:
            sc = ax.scatter(obs.coords[pos, 0], obs.coords[pos, 1], c=summary.mean[sel], s=4, cmap="viridis")
            fig.colorbar(sc, ax=ax)
            ax.set_aspect("equal", adjustable="datalim")
        ax.set_title(f"type {k}: latent posterior mean")
    return _save(fig, path)
