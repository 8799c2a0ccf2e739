"""Box-plot figures of run accuracies, one panel per scenario group."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# Agg writes a Software tag by default; dropping it keeps output byte-stable
PNG_METADATA = {"Software": None}

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}


def accuracy_boxplots(runs: Sequence, metric: str, path: str | Path,
                      title: str | None = None) -> Path | None:
    """Save one box per pipeline and group; red marks show the mean.

    ``metric`` is ``"labeling"`` or ``"classification"``.  Returns ``None``
    when there is nothing to draw.
    """
    import matplotlib as mpl

    groups: dict[str, dict[str, list[float]]] = {}
    for r in runs:
        if not r.ok:
            continue
        groups.setdefault(r.group, {}).setdefault(r.pipeline, []).append(
            getattr(r, f"{metric}_accuracy")
        )
    if not groups:
        return None

    with mpl.rc_context(RC):
        fig = Figure(figsize=(3.2 * len(groups), 3.0))
        FigureCanvasAgg(fig)
        axes = fig.subplots(1, len(groups), squeeze=False)[0]
        for ax, (group, by_pipe) in zip(axes, groups.items()):
            names = list(by_pipe)
            values = [by_pipe[n] for n in names]
            ax.boxplot(values, whis=1.5, sym="+", widths=0.5)
            ax.plot(range(1, len(names) + 1), [np.mean(v) for v in values],
                    "r_", markersize=14, markeredgewidth=2)
            ax.set_xticks(range(1, len(names) + 1))
            ax.set_xticklabels(names, rotation=30, ha="right")
            ax.set_ylim(-0.02, 1.02)
            ax.set_title(group)
            ax.grid(axis="y", alpha=0.3)
        axes[0].set_ylabel(f"{metric} accuracy")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, dpi=120, metadata=PNG_METADATA)
    return path
