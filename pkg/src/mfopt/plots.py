"""Figure rendering for campaign reports.

All figures are written straight to files (Agg backend, no display).
Box plots use the same quartile and 1.5*IQR conventions as the
aggregate statistics tables they accompany.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_box_plot(groups: list[tuple[str, np.ndarray]], metric: str, path) -> None:
    """One box per labelled group of repetition values."""
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(groups), 3.2))
    ax.boxplot(
        [np.asarray(v, dtype=float) for _, v in groups],
        tick_labels=[label for label, _ in groups],
        whis=1.5,
    )
    ax.set_ylabel(metric)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_grid_1d(x: np.ndarray, mean: np.ndarray, unc: np.ndarray, path) -> None:
    """Surrogate mean with its 95% band along a 1-D domain."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(x, mean, color="tab:blue", label="prediction")
    ax.fill_between(x, mean - unc, mean + unc, color="tab:blue", alpha=0.25,
                    label="95% band")
    ax.set_xlabel("x")
    ax.set_ylabel("objective")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_grid_2d(x1, x2, values: np.ndarray, label: str, path) -> None:
    """Heat map of a surface sampled on a regular grid."""
    fig, ax = plt.subplots(figsize=(4.4, 3.6))
    pcm = ax.pcolormesh(x1, x2, values, shading="auto", cmap="viridis")
    fig.colorbar(pcm, ax=ax, label=label)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
