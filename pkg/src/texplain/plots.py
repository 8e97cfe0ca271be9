"""Matplotlib renderings that accompany the delimited outputs: operator
importance bars (SVG), per-class tau bars with error bars, and the perturbed
image contact sheet."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

from .raster import Raster
from .surrogate import ImportanceReport


def save_importance_chart(report: ImportanceReport, path: str | Path, title: str = "") -> None:
    """Horizontal bar chart of per-operator importance, largest on top."""
    ids = report.ranked_ids()
    values = [report.by_id[i] for i in ids]
    fig, ax = plt.subplots(figsize=(6.4, 0.35 * len(ids) + 1.2))
    ax.barh(range(len(ids)), values, color="#4c72b0")
    ax.set_yticks(range(len(ids)), ids)
    ax.invert_yaxis()
    ax.set_xlabel("importance")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_tau_chart(rows: Sequence[tuple[str, float, float]], path: str | Path) -> None:
    """Per-class mean tau with population-std error bars."""
    labels = [r[0] for r in rows]
    means = [r[1] for r in rows]
    stds = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(rows) + 2.0), 4.0))
    ax.bar(range(len(rows)), means, yerr=stds, capsize=4, color="#55a868")
    ax.set_xticks(range(len(rows)), labels, rotation=30, ha="right")
    ax.set_ylabel("Kendall's tau")
    ax.set_ylim(-1.05, 1.05)
    ax.axhline(0.0, color="black", linewidth=0.8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_contact_sheet(tiles: Sequence[tuple[str, Raster]], path: str | Path, columns: int = 4) -> None:
    """Grid of labeled image tiles (the operator demonstration sheet)."""
    n = len(tiles)
    columns = min(columns, n)
    rows = (n + columns - 1) // columns
    fig, axes = plt.subplots(rows, columns, figsize=(2.4 * columns, 2.6 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    for ax, (label, img) in zip(axes.ravel(), tiles):
        ax.imshow(img.pixels)
        ax.set_title(label, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
