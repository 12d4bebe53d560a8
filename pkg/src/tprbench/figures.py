"""Figure rendering for the report paths (written next to the delimited outputs)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_wordcount_histogram(histogram: Mapping[int, int], path: str | Path) -> None:
    """Bar chart of the caption word-count distribution."""
    counts = sorted(histogram)
    freqs = [histogram[c] for c in counts]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(counts, freqs, width=0.9, color="#4878cf")
    ax.set_xlabel("words per caption")
    ax.set_ylabel("captions")
    ax.set_title("Caption word-count distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_metric_distributions(per_query: Sequence[Mapping], path: str | Path) -> None:
    """Side-by-side histograms of per-query AP and SD."""
    aps = [q["ap"] for q in per_query]
    sds = [q["sd"] for q in per_query]
    fig, (ax_ap, ax_sd) = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    ax_ap.hist(aps, bins=20, range=(0, 1), color="#4878cf")
    ax_ap.set_xlabel("AP")
    ax_ap.set_ylabel("queries")
    ax_sd.hist(sds, bins=20, range=(0, 1), color="#6acc65")
    ax_sd.set_xlabel("SD")
    fig.suptitle("Per-query metric distributions")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
