"""Figure rendering for the report commands (written next to the JSON/CSV outputs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .corpus import PHRASE_TAGS, SyntaxStats


def save_phrase_histograms(stats: SyntaxStats, path) -> None:
    """Grouped bars of per-sentence NP/VP/PP counts."""
    fig, ax = plt.subplots(figsize=(7, 4))
    max_count = max((len(h) for h in stats.histograms.values()), default=0)
    width = 0.8 / max(len(PHRASE_TAGS), 1)
    x = np.arange(max_count)
    for offset, tag in enumerate(PHRASE_TAGS):
        buckets = stats.histograms.get(tag, [])
        heights = [buckets[i] if i < len(buckets) else 0 for i in range(max_count)]
        ax.bar(x + offset * width, heights, width=width, label=tag)
    ax.set_xticks(x + width)
    ax.set_xticklabels([str(i) for i in range(max_count)])
    ax.set_xlabel("phrases per sentence")
    ax.set_ylabel("sentences")
    ax.set_title("Phrase counts per description")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_structure_distribution(stats: SyntaxStats, path, top: int = 20) -> None:
    """Bars for the most frequent sentence structures with the cumulative curve."""
    entries = stats.structures[:top]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if entries:
        labels = [" ".join(s.pattern) for s in entries]
        x = np.arange(len(entries))
        ax.bar(x, [s.frequency for s in entries], color="0.25", label="frequency")
        ax.plot(x, [s.cumulative for s in entries], color="tab:red", marker="o",
                label="cumulative")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
        ax.set_ylim(0, 1.05)
    ax.set_ylabel("fraction of sentences")
    ax.set_title(f"Top {len(entries)} sentence structures")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_loss_trace(epoch_losses: list[float], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(epoch_losses) + 1), epoch_losses, marker="o")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean example loss")
    ax.set_title("Training loss")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bleu_scores(blocks: dict[str, list[float]], path) -> None:
    """Grouped B-1..B-4 bars, one group per labelled score set (model, human)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    n_orders = max((len(v) for v in blocks.values()), default=4)
    x = np.arange(n_orders)
    width = 0.8 / max(len(blocks), 1)
    for offset, (label, scores) in enumerate(blocks.items()):
        ax.bar(x + offset * width, scores, width=width, label=label)
    ax.set_xticks(x + width * (len(blocks) - 1) / 2)
    ax.set_xticklabels([f"B-{k + 1}" for k in range(n_orders)])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("BLEU")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
