"""Report figures written next to the tab-separated outputs of the CLI."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .units import to_string  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def ablation_figure(results, path) -> Path:
    """Grouped precision/recall/F1 bars, one group per feature ablation."""
    names = list(results)
    rows = np.array([[r.metrics.precision, r.metrics.recall, r.metrics.f1] for r in results.values()])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 2.8))
        x = np.arange(len(names))
        width = 0.26
        for j, label in enumerate(("precision", "recall", "F1")):
            ax.bar(x + (j - 1) * width, rows[:, j] if len(rows) else [], width, label=label)
        ax.set_xticks(x)
        ax.set_xticklabels(names)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("cross-validated score")
        ax.legend(ncol=3, loc="upper left", frameon=False)
        return _save(fig, path)


def mention_histogram(mentions, path) -> Path:
    """Histogram of log10 mention values, one series per unit."""
    by_unit = defaultdict(list)
    for m in mentions:
        by_unit[to_string(m.unit)].append(math.log10(m.value))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 2.8))
        if by_unit:
            lo = math.floor(min(min(v) for v in by_unit.values()))
            hi = math.ceil(max(max(v) for v in by_unit.values()))
            edges = np.arange(lo, max(hi, lo + 1) + 1)
            units = sorted(by_unit)
            ax.hist([by_unit[u] for u in units], bins=edges, label=units, stacked=True)
            ax.legend(frameon=False)
        ax.set_xlabel("log10 value (base units)")
        ax.set_ylabel("mentions")
        return _save(fig, path)


def usefulness_by_length(examples, path) -> Path:
    """Useful vs not-useful counts by number of tuples in the formula."""
    counts = defaultdict(lambda: [0, 0])
    for ex in examples:
        counts[len(ex.formula.tuple_ids)][int(ex.useful)] += 1
    lengths = sorted(counts)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        x = np.arange(len(lengths))
        ax.bar(x - 0.2, [counts[k][1] for k in lengths], 0.4, label="useful")
        ax.bar(x + 0.2, [counts[k][0] for k in lengths], 0.4, label="not useful")
        ax.set_xticks(x)
        ax.set_xticklabels([str(k) for k in lengths])
        ax.set_xlabel("tuples in formula")
        ax.set_ylabel("examples")
        ax.legend(frameon=False)
        return _save(fig, path)
