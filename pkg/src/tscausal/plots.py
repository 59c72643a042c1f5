"""Render cohort and benchmark reports as PNG figures next to the CSVs.

Figures are byte-deterministic: the Agg backend, a fixed dpi, and stripped
metadata mean reruns produce identical files.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .fileio import atomic_write_bytes  # noqa: E402

_DPI = 150
_SAVE_KWARGS = {"dpi": _DPI, "metadata": {"Software": None}}


def _save(fig, path: "str | Path") -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", **_SAVE_KWARGS)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def save_link_count_histogram(counts, path, pair_label: str = "") -> None:
    """Distribution of per-subject link counts for the studied pair."""
    counts = np.asarray(counts)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    upper = max(int(counts.max()), 1) if counts.size else 1
    bins = np.arange(-0.5, upper + 1.5)
    ax.hist(counts, bins=bins, color="#4878a8", edgecolor="black", linewidth=0.5)
    ax.set_xlabel(f"number of causal links {pair_label}".strip())
    ax.set_ylabel("subjects")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def save_lag_probability_curve(lags_seconds, probabilities, path, pair_label: str = "") -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    minutes = np.asarray(lags_seconds) / 60.0
    ax.plot(minutes, probabilities, color="#305080", linewidth=1.2)
    ax.set_xlabel("lag (minutes)")
    ax.set_ylabel(f"probability of a causal link {pair_label}".strip())
    ax.set_ylim(bottom=0)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def save_trajectory_comparison(
    lags_seconds_1min,
    trajectory_1min,
    path,
    lags_seconds_15min=None,
    trajectory_15min=None,
) -> None:
    """Mean |statistic| per lag, optionally overlaying a coarser-resolution run."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(
        np.asarray(lags_seconds_1min) / 60.0,
        trajectory_1min,
        color="#305080",
        linewidth=1.0,
        label="fine resolution",
    )
    if lags_seconds_15min is not None and trajectory_15min is not None:
        ax.plot(
            np.asarray(lags_seconds_15min) / 60.0,
            trajectory_15min,
            color="#b05030",
            linewidth=1.4,
            marker="o",
            markersize=3,
            label="coarse resolution",
        )
        ax.legend()
    ax.set_xlabel("lag (minutes)")
    ax.set_ylabel("mean normalised |statistic|")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def save_correlation_bars(reports, path) -> None:
    """Grouped bars of Pearson/Spearman values per compared variable and kind."""
    labels, pearson, spearman = [], [], []
    for report in reports:
        for row in report.rows:
            labels.append(f"{row.variable}\n({report.comparison_kind})")
            pearson.append(row.pearson_r)
            spearman.append(row.spearman_rho)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(labels) + 2), 4.5))
    pos = np.arange(len(labels))
    width = 0.38
    ax.bar(pos - width / 2, pearson, width, label="Pearson r", color="#4878a8")
    ax.bar(pos + width / 2, spearman, width, label="Spearman rho", color="#b05030")
    ax.set_xticks(pos)
    ax.set_xticklabels(labels, fontsize=8)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_ylabel("correlation")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def save_benchmark_bars(rows, path) -> None:
    """Precision/recall/FPR per benchmark cell.

    ``rows`` are dicts with keys name, precision, recall, fpr.
    """
    names = [r["name"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(6.0, 1.4 * len(names) + 2), 4.5))
    pos = np.arange(len(names))
    width = 0.27
    ax.bar(pos - width, [r["precision"] for r in rows], width, label="precision", color="#4878a8")
    ax.bar(pos, [r["recall"] for r in rows], width, label="recall", color="#48a878")
    ax.bar(pos + width, [r["fpr"] for r in rows], width, label="FPR", color="#b05030")
    ax.set_xticks(pos)
    ax.set_xticklabels(names, fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
