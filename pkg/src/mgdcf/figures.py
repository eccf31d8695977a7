"""Figure rendering for the CLI report paths.

Every report that writes a delimited text file also renders a small PNG next
to it; the Agg backend keeps rendering headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = ["save_history_figure", "save_histogram_figure"]

_FIGSIZE = (7.0, 4.2)
_DPI = 120


def save_history_figure(history: list[dict], path) -> None:
    """Metric trajectory: NDCG and recall per epoch, loss on a twin axis."""
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    if history:
        epochs = [r["epoch"] for r in history]
        ax.plot(epochs, [r["ndcg"] for r in history], marker="o", ms=3,
                label=f"NDCG@{history[0]['cutoff']}")
        ax.plot(epochs, [r["recall"] for r in history], marker="s", ms=3,
                label=f"Recall@{history[0]['cutoff']}")
        twin = ax.twinx()
        twin.plot(epochs, [r["loss"] for r in history], color="0.55",
                  lw=1.0, label="loss")
        twin.set_ylabel("training loss", color="0.4")
        ax.legend(loc="lower right")
    ax.set_xlabel("epoch")
    ax.set_ylabel("ranking metric")
    ax.set_title("training trajectory")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_histogram_figure(
    counts: np.ndarray, edges: np.ndarray, threshold: float, path
) -> None:
    """Affinity-weight histogram with the sparsification threshold marked."""
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    counts = np.asarray(counts, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    widths = np.diff(edges)
    ax.bar(edges[:-1], counts, width=widths, align="edge",
           color="#4878a8", edgecolor="white", linewidth=0.3)
    if counts.max(initial=0.0) > 0:
        ax.set_yscale("log")
    if threshold is not None and math.isfinite(threshold):
        ax.axvline(threshold, color="#b33", ls="--", lw=1.2,
                   label=f"threshold = {threshold:.4g}")
        ax.legend()
    ax.set_xlabel("affinity weight")
    ax.set_ylabel("pair count")
    ax.set_title("item-item affinity weights")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
