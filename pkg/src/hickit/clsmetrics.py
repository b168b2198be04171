"""Binary patch-classifier metrics with threshold-averaged AP/AR.

A sample is predicted positive at threshold tau when its score is >= tau
(the boundary is inclusive). AP and AR average precision respectively recall
over the 101 thresholds {0.00, 0.01, ..., 1.00}; precision counts as 0.0 at
thresholds where nothing is predicted positive. This averaging, unlike the
area under the PR curve, does not reward a classifier whose precision or
recall collapses over a wide score band, which is exactly the regime these
models occupy. The PR-area estimate stays available for comparison via
ap_pr_area().
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError, FormatError

THRESHOLD_GRID = tuple(i / 100 for i in range(101))


@dataclass(frozen=True)
class ScoredSample:
    """One patch with its model score and ground-truth label."""

    patch_id: str
    score: float
    label: bool

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DatasetError(f"{self.patch_id}: score {self.score} outside [0, 1]")


def _arrays(samples: list[ScoredSample]) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        raise DatasetError("empty sample list")
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples], dtype=bool)
    return scores, labels


def confusion_at(samples: list[ScoredSample], tau: float) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) under the score >= tau decision rule."""
    scores, labels = _arrays(samples)
    predicted = scores >= tau
    tp = int(np.count_nonzero(predicted & labels))
    fp = int(np.count_nonzero(predicted & ~labels))
    tn = int(np.count_nonzero(~predicted & ~labels))
    fn = int(np.count_nonzero(~predicted & labels))
    return tp, fp, tn, fn


def prf_cls(samples: list[ScoredSample], tau: float = 0.5) -> dict:
    """Precision, recall, F1, accuracy, support at a single threshold."""
    tp, fp, tn, fn = confusion_at(samples, tau)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "tau": tau,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "accuracy": (tp + tn) / len(samples),
        "support": tp + fn,
    }


def ap_cls(samples: list[ScoredSample]) -> float:
    """Mean precision over the 101-threshold grid."""
    scores, labels = _arrays(samples)
    total = 0.0
    for tau in THRESHOLD_GRID:
        predicted = scores >= tau
        n_pred = int(np.count_nonzero(predicted))
        if n_pred:
            total += int(np.count_nonzero(predicted & labels)) / n_pred
    return total / len(THRESHOLD_GRID)


def ar_cls(samples: list[ScoredSample]) -> float:
    """Mean recall over the 101-threshold grid; 0.0 if there are no positives."""
    scores, labels = _arrays(samples)
    n_pos = int(np.count_nonzero(labels))
    if n_pos == 0:
        return 0.0
    total = 0.0
    for tau in THRESHOLD_GRID:
        total += int(np.count_nonzero((scores >= tau) & labels)) / n_pos
    return total / len(THRESHOLD_GRID)


def ap_pr_area(samples: list[ScoredSample]) -> float:
    """Area-style AP: sum of precision-weighted recall increments by rank.

    Offered only for comparison with the threshold-averaged estimate.
    """
    scores, labels = _arrays(samples)
    n_pos = int(np.count_nonzero(labels))
    if n_pos == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(labels[order])
    ranks = np.arange(1, len(order) + 1)
    precision = tp / ranks
    recall = tp / n_pos
    prev = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev) * precision))


def cls_report(samples: list[ScoredSample], tau: float = 0.5) -> dict:
    """Single-threshold metrics plus the threshold-averaged AP/AR."""
    report = prf_cls(samples, tau)
    report["ap"] = ap_cls(samples)
    report["ar"] = ar_cls(samples)
    report["n_samples"] = len(samples)
    flags = {}
    if report["support"] == 0:
        flags["no_positive_labels"] = True
    if report["support"] == len(samples):
        flags["no_negative_labels"] = True
    report["flags"] = flags
    return report


def multiclass_report(y_true: list[str], y_pred: list[str],
                      classes: list[str] | None = None) -> dict:
    """Per-class one-vs-rest precision/recall/F1 plus macro averages.

    Args:
        y_true: ground-truth class names.
        y_pred: predicted class names, same length.
        classes: row order; defaults to sorted union of observed names.
    """
    if len(y_true) != len(y_pred):
        raise DatasetError(f"length mismatch: {len(y_true)} labels vs {len(y_pred)} predictions")
    if not y_true:
        raise DatasetError("empty sample list")
    if classes is None:
        classes = sorted(set(y_true) | set(y_pred))
    rows = {}
    for cls in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        rows[cls] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": tp + fn,
        }
    macro = {
        "precision": sum(r["precision"] for r in rows.values()) / len(rows),
        "recall": sum(r["recall"] for r in rows.values()) / len(rows),
        "f1": sum(r["f1"] for r in rows.values()) / len(rows),
        "support": sum(r["support"] for r in rows.values()),
    }
    accuracy = sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true)
    return {"classes": rows, "macro": macro, "accuracy": accuracy}


def load_scores(path: str | Path) -> dict[str, float]:
    """Read a score file: one JSON object {patch_id, score} per line.

    Lines starting with a header object (any object carrying a "tool" key
    and no patch_id) are skipped so exported files can carry provenance.
    """
    path = Path(path)
    out: dict[str, float] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
        if "patch_id" not in raw:
            if "tool" in raw:
                continue
            raise FormatError(f"{path}: line {lineno}: missing patch_id")
        patch_id = raw["patch_id"]
        if patch_id in out:
            raise FormatError(f"{path}: line {lineno}: duplicate patch_id {patch_id!r}")
        try:
            out[patch_id] = float(raw["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: line {lineno}: bad score: {exc}") from exc
    return out


def join_scores(scores: dict[str, float], labels: dict[str, bool]) -> list[ScoredSample]:
    """Join a score file against manifest labels on patch_id.

    Every scored patch must have a label; patches without scores are
    reported too, since a silent partial join would skew every metric.
    """
    missing_labels = sorted(set(scores) - set(labels))
    if missing_labels:
        raise DatasetError(
            f"{len(missing_labels)} scored patches missing from the manifest, "
            f"first few: {missing_labels[:5]}"
        )
    missing_scores = sorted(set(labels) - set(scores))
    if missing_scores:
        raise DatasetError(
            f"{len(missing_scores)} labeled patches missing scores, "
            f"first few: {missing_scores[:5]}"
        )
    return [ScoredSample(pid, scores[pid], labels[pid]) for pid in sorted(scores)]
