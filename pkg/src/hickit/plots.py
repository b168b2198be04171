"""Figure rendering for evaluation reports.

Matplotlib only, Agg backend, files on disk; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .detmetrics import PRCurve  # noqa: E402


def render_pr_curves(curves: list[tuple[float, PRCurve]], path: str | Path,
                     title: str = "precision vs. recall") -> None:
    """Draw one precision/recall polyline per IoU threshold into an SVG.

    Axes span [0, 1] in both directions and are labeled; each curve is
    legended with its IoU threshold.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for iou, curve in curves:
        if not curve.points:
            continue
        recalls = [r for r, _ in curve.points]
        precisions = [p for _, p in curve.points]
        ax.plot(recalls, precisions, linewidth=1.2, label=f"IoU {iou:.2f}")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_title(title)
    if any(curve.points for _, curve in curves):
        ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, linewidth=0.3, alpha=0.5)
    fig.tight_layout()
    fig.savefig(str(path), format=Path(path).suffix.lstrip(".") or "svg")
    plt.close(fig)


def render_split_counts(counts: dict[str, dict[str, int]], path: str | Path,
                        title: str) -> None:
    """Grouped bar chart of positive/negative patch counts per split."""
    splits = [s for s in ("train", "val", "test") if s in counts]
    pos = [counts[s]["true"] for s in splits]
    neg = [counts[s]["false"] for s in splits]
    x = range(len(splits))
    width = 0.38
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.bar([i - width / 2 for i in x], pos, width, label="honeycomb")
    ax.bar([i + width / 2 for i in x], neg, width, label="background")
    ax.set_xticks(list(x))
    ax.set_xticklabels(splits)
    ax.set_ylabel("patches")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(str(path))
    plt.close(fig)
