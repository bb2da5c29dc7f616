"""Figure rendering for the CLI report path.

Uses the Agg backend so artifacts render identically with no display;
given the same inputs and matplotlib version the PNG bytes are stable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_line_chart(path, x, series: dict[str, "list | object"], *,
                      xlabel: str, ylabel: str, title: str) -> Path:
    """One-panel line chart: each entry of `series` is a labeled line."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    for label, y in series.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def render_panels(path, x, panels: list[tuple[str, dict[str, "list | object"]]],
                  *, xlabel: str, title: str) -> Path:
    """Vertically stacked panels sharing an x axis.

    `panels` is a list of (ylabel, series) pairs in top-to-bottom order.
    """
    fig, axes = plt.subplots(len(panels), 1, sharex=True,
                             figsize=(6.0, 2.4 * len(panels)), dpi=100)
    if len(panels) == 1:
        axes = [axes]
    for ax, (ylabel, series) in zip(axes, panels):
        for label, y in series.items():
            ax.plot(x, y, label=label)
        ax.set_ylabel(ylabel)
        if len(series) > 1:
            ax.legend()
    axes[-1].set_xlabel(xlabel)
    axes[0].set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
