"""Figure rendering for report files. Headless backend, deterministic PNG bytes."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["line_figure", "bar_figure"]

FIGSIZE = (6.0, 4.0)
DPI = 150
# PNG metadata is stripped so repeated runs produce identical bytes
_METADATA = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=DPI, metadata=_METADATA)
    plt.close(fig)
    return path


def line_figure(
    path: str | Path,
    x: Sequence[float],
    series: Mapping[str, Sequence[float]],
    xlabel: str,
    ylabel: str,
    logy: bool = False,
) -> Path:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label, y in series.items():
        ax.plot(x, y, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def bar_figure(
    path: str | Path,
    labels: Sequence[str],
    values: Sequence[float],
    ylabel: str,
) -> Path:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.bar(range(len(labels)), values)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)
