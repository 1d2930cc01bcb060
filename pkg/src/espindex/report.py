"""Figures for bench and stats output (written to files, Agg backend)."""
from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_bench(rows, path, title=None):
    """Mean query time against pattern length, one line per strategy."""
    series = defaultdict(list)
    for r in rows:
        series[(r["strategy"], r["epsilon"])].append((int(r["length"]), float(r["mean_ms"])))
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for (strategy, eps), pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{strategy}, eps={eps}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("pattern length")
    ax.set_ylabel("mean count time (ms)")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_space(space: dict, path, title=None):
    """Stacked bar of the stored structures next to the bound."""
    parts = [k for k in space if k not in ("core_bits", "lengths_bits", "bound")]
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    bottom = 0
    for k in parts:
        ax.bar(0, space[k], bottom=bottom, label=k)
        bottom += space[k]
    if "bound" in space:
        ax.axhline(space["bound"], color="k", ls="--", lw=1, label="bound")
    ax.set_xticks([])
    ax.set_ylabel("bits")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
