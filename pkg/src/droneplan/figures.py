"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_interval_profits(report, path: Path) -> Path:
    """Per-interval profit lines, one per policy (mean across seeds)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for policy in report.policies:
        rows = [v for (seed, p), v in report.interval_profits.items() if p == policy]
        if not rows:
            continue
        length = min(len(r) for r in rows)
        mean = np.mean([r[:length] for r in rows], axis=0)
        ax.plot(range(1, length + 1), mean, marker="o", label=policy)
    ax.set_xlabel("interval")
    ax.set_ylabel("profit acquired")
    ax.set_title("Profit per interval (mean over seeds)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_heatmap(report, path: Path) -> Path:
    """Profit-gap heat map: seeds by policies, percent vs. the myopic row."""
    policies = [p for p in report.policies if p != "myopic"]
    if not policies:
        policies = report.policies
    matrix = np.zeros((len(report.seeds), len(policies)))
    for i, seed in enumerate(report.seeds):
        for j, policy in enumerate(policies):
            row = report.row(seed, policy)
            matrix[i, j] = row.profit_gap_pct if row.profit_gap_pct is not None else 0.0
    fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(policies)), max(3, 0.5 * len(report.seeds) + 1)))
    image = ax.imshow(matrix, cmap="RdYlGn", aspect="auto")
    ax.set_xticks(range(len(policies)), policies, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(report.seeds)), [str(s) for s in report.seeds], fontsize=8)
    ax.set_xlabel("policy")
    ax.set_ylabel("seed")
    ax.set_title("Profit gap % vs. myopic")
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            ax.text(j, i, f"{matrix[i, j]:.1f}", ha="center", va="center", fontsize=7)
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
