"""Figure rendering for CLI reports. Figures are written next to the CSV
output; matplotlib runs headless (Agg)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import FreespaceReport, SweepPoint


def save_pr_curve(points: Sequence[SweepPoint], path: Path) -> None:
    """Precision-recall progression over the threshold sweep."""
    fig, ax = plt.subplots(figsize=(6, 5))
    recall = [p.recall for p in points]
    precision = [p.precision for p in points]
    ax.plot(recall, precision, "o-", color="teal", label="micro")
    ax.plot(
        [p.recall_macro for p in points],
        [p.precision_macro for p in points],
        "s--",
        color="orchid",
        alpha=0.7,
        label="macro",
    )
    for p in points:
        ax.annotate(f"t={p.threshold:.2f}", (p.recall, p.precision), fontsize=7, alpha=0.8)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_f1_curve(points: Sequence[SweepPoint], path: Path) -> None:
    """F1 over threshold, with the operating point highlighted."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ts = [p.threshold for p in points]
    ax.plot(ts, [p.f1 for p in points], "o-", color="teal", label="F1 micro")
    ax.plot(ts, [p.f1_macro for p in points], "s--", color="orchid", alpha=0.7, label="F1 macro")
    best = max(points, key=lambda p: p.f1)
    ax.axvline(best.threshold, color="gray", linestyle=":", label=f"best t={best.threshold:.2f}")
    ax.set_xlabel("occupancy threshold t")
    ax.set_ylabel("F1")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_freespace_figure(
    reports: Sequence[FreespaceReport], labels: Sequence[str], path: Path
) -> None:
    """Per-frame free-space scores with their column-score spread."""
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(reports) + 2), 4))
    xs = range(len(reports))
    scores = [r.score for r in reports]
    sigmas = [r.sigma for r in reports]
    ax.bar(xs, scores, yerr=sigmas, color="teal", alpha=0.8, capsize=3)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("free-space score [%]")
    ax.set_ylim(0, 105)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
