"""Optional matplotlib rendering next to the delimited report files.

Every CLI report path emits CSV/JSON first; these helpers turn the same data
into PNG files when a figure directory is requested.  All figures use the Agg
backend so they render headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import GroupSummary
from .pipeline import MatrixRow


def _finish(fig, out_path: str | Path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_group_scores(
    summaries: dict[str, GroupSummary], out_path: str | Path, title: str = "Macro F1 by group"
) -> Path:
    """Box plot of per-group Macro F1 (one box per grouping, deputy/month)."""
    names = [name for name, s in summaries.items() if s.scores]
    data = [[g.score for g in summaries[name].scores] for name in names]
    fig, ax = plt.subplots(figsize=(5, 4))
    if data:
        ax.boxplot(data, tick_labels=names, whis=(0, 100))
    ax.set_ylabel("Macro F1")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(title)
    ax.grid(axis="y", alpha=0.3)
    return _finish(fig, out_path)


def plot_matrix_bars(
    rows: Sequence[MatrixRow], dimension: str, out_path: str | Path
) -> Path:
    """Grouped bars of CV vs test Macro F1 along one grid dimension."""
    ok = [r for r in rows if r.status == "ok"]
    labels = [str(getattr(r.cell, dimension)) for r in ok]
    cv = [r.cv_mean if r.cv_mean is not None else 0.0 for r in ok]
    test = [r.test_f1 if r.test_f1 is not None else 0.0 for r in ok]
    x = range(len(ok))
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.38
    ax.bar([i - width / 2 for i in x], cv, width, label="cross-validation")
    ax.bar([i + width / 2 for i in x], test, width, label="test")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("Macro F1")
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel(dimension)
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    return _finish(fig, out_path)


def plot_word_frequencies(
    frequencies: Sequence[tuple[str, int]], out_path: str | Path, top: int = 25,
    title: str = "Most frequent words",
) -> Path:
    """Horizontal bar chart of the top word counts (word-cloud stand-in)."""
    head = list(frequencies[:top])[::-1]
    words = [w for w, _ in head]
    counts = [c for _, c in head]
    fig, ax = plt.subplots(figsize=(6, max(3, 0.28 * len(head))))
    ax.barh(range(len(head)), counts)
    ax.set_yticks(range(len(head)))
    ax.set_yticklabels(words)
    ax.set_xlabel("count")
    ax.set_title(title)
    return _finish(fig, out_path)


def plot_loss_history(history: Sequence[float], out_path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(range(1, len(history) + 1), history, marker="o", markersize=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.grid(alpha=0.3)
    return _finish(fig, out_path)


def plot_topic_shares(
    shares: Sequence[float], out_path: str | Path, title: str = "Corpus share per topic"
) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(1, len(shares) + 1), shares)
    ax.set_xlabel("topic")
    ax.set_ylabel("% of documents")
    ax.set_xticks(range(1, len(shares) + 1))
    ax.set_title(title)
    return _finish(fig, out_path)
