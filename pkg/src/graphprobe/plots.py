"""Figure rendering for report outputs.

Every report path writes plot-ready CSVs; these helpers render the matching
matplotlib figures next to them: F1-versus-labelled-fraction curves,
confusion-matrix heatmaps, and class-colored 2-D projections.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .probe import ProbeReport
from .projection import Projection2D


def plot_f1_curves(report: ProbeReport, out_path: Path) -> bool:
    """Mean micro/macro F1 against labelled fraction, one panel pair per
    report; returns False (no figure) when fewer than two numeric
    fractions were swept."""
    fractions = sorted(f for f in report.config.fractions if f is not None)
    if len(fractions) < 2:
        return False
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharex=True)
    for feature in report.config.features:
        micro = [report.mean_micro(feature, f) for f in fractions]
        macro = [report.mean_macro(feature, f) for f in fractions]
        axes[0].plot(fractions, micro, marker="o", label=feature)
        axes[1].plot(fractions, macro, marker="o", label=feature)
    axes[0].set_ylabel("micro F1")
    axes[1].set_ylabel("macro F1")
    for ax in axes:
        ax.set_xlabel("labelled fraction")
        ax.set_ylim(0.0, 1.0)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.suptitle(f"{report.method}: probe scores ({report.config.probe_kind})")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return True


def plot_confusion(report: ProbeReport, feature: str, out_path: Path) -> None:
    """Heatmap of the summed confusion matrix for one feature."""
    matrices = [c.confusion for c in report.cells if c.feature == feature]
    if not matrices:
        raise ValueError(f"report holds no cells for feature {feature!r}")
    total = np.sum(matrices, axis=0).astype(np.float64)
    row_sums = total.sum(axis=1, keepdims=True)
    shares = np.divide(total, row_sums, out=np.zeros_like(total), where=row_sums > 0)
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    im = ax.imshow(shares, cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    ax.set_title(f"{report.method}: {feature}")
    fig.colorbar(im, ax=ax, label="row share")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_projection(projection: Projection2D, labels: np.ndarray, out_path: Path) -> None:
    """Scatter of the 2-D projection colored by class label."""
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    scatter = ax.scatter(
        projection.points[:, 0],
        projection.points[:, 1],
        c=labels,
        cmap="viridis",
        s=9,
        linewidths=0,
    )
    ax.set_title(f"{projection.method_tag} (perplexity {projection.perplexity:g})")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.colorbar(scatter, ax=ax, label="class")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
