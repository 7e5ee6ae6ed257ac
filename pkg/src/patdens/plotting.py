"""Optional figures for experiment output (needs matplotlib)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence


def plot_rows(path: str | Path, columns: Sequence[str], rows: Sequence[Sequence], title: str) -> None:
    """Plot every scaled column against n on a log2 axis and save to ``path``.

    Rows carrying an ``order`` column get one line per order.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    idx = {name: i for i, name in enumerate(columns)}
    series: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        label = f"order {row[idx['order']]}" if "order" in idx else "scaled"
        series.setdefault(label, []).append((float(row[idx["n"]]), float(row[idx["scaled"]])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in series.items():
        xs, ys = zip(*pts)
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("scaled estimate")
    ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
