"""Figure helpers.  Everything renders off-screen to files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def line_plot(path, series, xlabel="t", ylabel="", title="", logy=False, hlines=()):
    """``series`` maps a label to an ``(x, y)`` pair."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, (x, y) in series.items():
        y = np.asarray(y, dtype=float)
        if logy:
            y = np.where(y > 0, y, np.nan)
        ax.plot(x, y, label=label)
    for value, label in hlines:
        ax.axhline(value, color="k", ls="--", lw=0.8, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)
    return Path(path)


def scatter_plot(path, x, y, xlabel="", ylabel="", title="", loglog=False, diagonal=False):
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.scatter(x, y, s=8)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    if diagonal:
        lo = float(min(np.min(x), np.min(y)))
        hi = float(max(np.max(x), np.max(y)))
        ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)
    return Path(path)
