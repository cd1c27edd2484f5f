"""Figure rendering for the command-line reports.

Everything draws to files through the non-interactive backend; no
function here ever opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_marginals",
    "plot_influence",
    "plot_acf",
    "plot_baseline_recovery",
]


def plot_marginals(mesh, mean_curve, surv_curve, path):
    """Marginal count mean and survival probability over time."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    axes[0].plot(mesh, mean_curve, color="tab:blue")
    axes[0].set_xlabel("time")
    axes[0].set_ylabel("expected count")
    axes[0].set_title("marginal count mean")
    axes[1].plot(mesh, surv_curve, color="tab:red")
    axes[1].set_xlabel("time")
    axes[1].set_ylabel("survival probability")
    axes[1].set_ylim(0.0, 1.02)
    axes[1].set_title("marginal survival")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_influence(kl, threshold, path):
    """Per-observation divergence with the flagging threshold."""
    kl = np.asarray(kl, dtype=float)
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    ax.scatter(np.arange(1, kl.size + 1), kl, s=12, color="tab:blue")
    ax.axhline(threshold, color="tab:red", linestyle="--", linewidth=1.0,
               label=f"threshold {threshold}")
    ax.set_xlabel("observation")
    ax.set_ylabel("KL divergence")
    ax.set_title("case-deletion influence")
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_acf(acf_rows, path):
    """Autocorrelation stems for a handful of focus parameters."""
    n = len(acf_rows)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.2), squeeze=False)
    for ax, (label, acf) in zip(axes[0], acf_rows.items()):
        lags = np.arange(len(acf))
        ax.vlines(lags, 0.0, acf, color="tab:blue", linewidth=1.0)
        ax.axhline(0.0, color="black", linewidth=0.6)
        ax.set_title(label)
        ax.set_xlabel("lag")
        ax.set_ylim(-0.3, 1.05)
    axes[0][0].set_ylabel("autocorrelation")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_baseline_recovery(eval_times, truth10, mean10, truth20, mean20, path):
    """Average estimated baseline functions against the generating truth."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    axes[0].plot(eval_times, truth10, color="black", label="truth")
    axes[0].plot(eval_times, mean10, color="tab:blue", marker="o",
                 markersize=3, linestyle="--", label="mean estimate")
    axes[0].set_title("baseline cumulative rate")
    axes[1].plot(eval_times, truth20, color="black", label="truth")
    axes[1].plot(eval_times, mean20, color="tab:red", marker="o",
                 markersize=3, linestyle="--", label="mean estimate")
    axes[1].set_title("baseline cumulative hazard")
    for ax in axes:
        ax.set_xlabel("time")
        ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
