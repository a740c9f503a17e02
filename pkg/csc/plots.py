"""SVG charts: ROC curve with its EER point and attention traces."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from csc.evaluation.attention import AttentionTrace
from csc.evaluation.metrics import RocCurve

FIGSIZE = (4.8, 3.6)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _save(figure: Figure, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    figure.tight_layout()
    figure.savefig(target, format="svg")
    return target


def roc_svg(curve: RocCurve, eer: float, path: str | Path, *, label: str = "ROC") -> Path:
    figure = Figure(figsize=FIGSIZE)
    ax = figure.add_subplot()
    ax.plot([0.0, 1.0], [0.0, 1.0], color="#999", linestyle="--", linewidth=1)
    ax.plot(curve.fpr, curve.tpr, color=PALETTE[0], linewidth=2, gid="roc")
    ax.plot([eer], [1.0 - eer], "o", color=PALETTE[1], gid="eer")
    ax.annotate(f"EER {eer:.3f}", (eer, 1.0 - eer), textcoords="offset points", xytext=(8, -12), fontsize=8)
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("FPR")
    ax.set_ylabel("TPR")
    ax.set_title(f"{label} (AUC {curve.auc:.3f}, EER {eer:.3f})", fontsize=9)
    return _save(figure, path)


def _unit(values: np.ndarray) -> np.ndarray:
    peak = float(np.max(values)) if values.size else 0.0
    return values / peak if peak > 0 else values


def attention_svg(trace: AttentionTrace, path: str | Path) -> Path:
    """One solid curve per source, its normalised segment energy dashed in the same colour."""
    figure = Figure(figsize=FIGSIZE)
    ax = figure.add_subplot()
    segments = np.arange(trace.segments)
    top = float(np.max(trace.curves)) if trace.curves.size else 1.0
    for c in range(trace.curves.shape[0]):
        colour = PALETTE[c % len(PALETTE)]
        ax.plot(
            segments,
            trace.curves[c] / top if top > 0 else trace.curves[c],
            color=colour,
            label=f"attention {c}",
            gid=f"attention-{c}",
        )
        ax.plot(segments, _unit(trace.energies[c]), color=colour, linestyle=":", label=f"energy {c}", gid=f"energy-{c}")
    ax.set_xlabel("segment")
    ax.set_ylabel("normalised value")
    ax.set_title(f"attention over segments, {trace.example_id}", fontsize=9)
    ax.legend(fontsize=7, framealpha=0.0)
    return _save(figure, path)


__all__ = ["attention_svg", "roc_svg"]
