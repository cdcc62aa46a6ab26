"""Report rendering: matplotlib figures and CSV files for CLI outputs.

Figures are written straight to files (no interactive backend), so these
helpers are safe in headless environments and on worker threads.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .flops import CostRow  # noqa: E402
from .ranking import Metrics  # noqa: E402


def _save(fig: plt.Figure, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out


def metrics_figure(metrics: Metrics, path: str | Path, title: str = "Retrieval metrics") -> Path:
    """Bar chart of R@1/R@5/R@10/Mean, annotated with the values."""
    labels = ["R@1", "R@5", "R@10", "Mean"]
    values = [metrics.r_at_1, metrics.r_at_5, metrics.r_at_10, metrics.mean]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bars = ax.bar(labels, values, color=["#4c72b0", "#55a868", "#c44e52", "#8172b2"])
    ax.bar_label(bars, fmt="%.1f", padding=2, fontsize=9)
    ax.set_ylim(0, 105)
    ax.set_ylabel("recall (%)")
    ax.set_title(title)
    ax.grid(axis="y", alpha=0.3)
    return _save(fig, path)


def sweep_figure(
    ks: Sequence[int],
    metrics: Sequence[Metrics],
    path: str | Path,
    title: str = "Candidate-depth sweep",
) -> Path:
    """Line chart of each metric as a function of the recall depth top-k."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    series = {
        "R@1": [m.r_at_1 for m in metrics],
        "R@5": [m.r_at_5 for m in metrics],
        "R@10": [m.r_at_10 for m in metrics],
        "Mean": [m.mean for m in metrics],
    }
    for label, values in series.items():
        ax.plot(list(ks), values, marker="o", linewidth=1.6, markersize=4, label=label)
    ax.set_xlabel("top-k recall depth")
    ax.set_ylabel("recall (%)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def cost_figure(rows: Sequence[CostRow], path: str | Path, title: str = "Per-pair cost") -> Path:
    """Horizontal log-scale bars of per-pair MACs, cheapest at the top."""
    fig, ax = plt.subplots(figsize=(6, 0.5 * len(rows) + 1.2))
    labels = [row.label for row in rows]
    values = [row.per_pair for row in rows]
    bars = ax.barh(range(len(rows)), values, color="#4c72b0")
    ax.set_yticks(range(len(rows)), labels)
    ax.invert_yaxis()
    ax.set_xscale("log")
    ax.set_xlabel("multiply-accumulates per text-video pair")
    ax.set_title(title)
    ax.bar_label(bars, labels=[f"{v / 1000:.1f}k" for v in values], padding=3, fontsize=8)
    ax.margins(x=0.15)
    return _save(fig, path)


def write_sweep_csv(ks: Sequence[int], metrics: Sequence[Metrics], path: str | Path) -> Path:
    """CSV with one row per top-k value: k, r_at_1, r_at_5, r_at_10, mean."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["top_k", "r_at_1", "r_at_5", "r_at_10", "mean"])
        for k, m in zip(ks, metrics):
            writer.writerow([k, f"{m.r_at_1:.6f}", f"{m.r_at_5:.6f}", f"{m.r_at_10:.6f}", f"{m.mean:.6f}"])
    return out


def write_cost_csv(rows: Sequence[CostRow], path: str | Path) -> Path:
    """CSV mirror of a cost table: label, kind, formula, per_pair, ratio."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "kind", "formula", "per_pair_macs", "ratio_to_cheapest"])
        for row in rows:
            writer.writerow([row.label, row.kind.value, row.formula,
                             f"{row.per_pair:.1f}", f"{row.ratio_to_cheapest:.2f}"])
    return out
