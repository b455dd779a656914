"""Figures written next to the CSV / line-JSON reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .metrics import PRF  # noqa: E402


def plot_training_curves(history, path, metric_name="dev metric"):
    epochs = [row["epoch"] for row in history]
    fig, (ax_loss, ax_metric) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [row["primary_loss_eval"] for row in history], marker="o", label="primary")
    if any(row["scaffold_loss_eval"] for row in history):
        ax_loss.plot(epochs, [row["scaffold_loss_eval"] for row in history], marker="s",
                     label="scaffold")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("summed loss, end of epoch")
    ax_loss.legend(frameon=False)
    ax_metric.plot(epochs, [row["dev_metric"] for row in history], marker="o", color="tab:green")
    ax_metric.set_xlabel("epoch")
    ax_metric.set_ylabel(metric_name)
    ax_metric.set_ylim(0, 1.02)
    for ax in (ax_loss, ax_metric):
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scores(scores, path):
    """Grouped precision / recall / F1 bars, one group per metric."""
    rows = [(name, s) for name, s in scores.items() if isinstance(s, PRF)]
    fig, ax = plt.subplots(figsize=(max(3.5, 1.8 * len(rows)), 3.2))
    width = 0.25
    for k, (part, color) in enumerate(zip(("precision", "recall", "f1"),
                                          ("tab:blue", "tab:orange", "tab:green"))):
        xs = [g + (k - 1) * width for g in range(len(rows))]
        ax.bar(xs, [getattr(s, part) for _, s in rows], width, label=part, color=color)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([name for name, _ in rows])
    ax.set_ylim(0, 1.05)
    ax.legend(frameon=False, fontsize=8)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
