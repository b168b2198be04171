"""Detection evaluation: greedy matching, PR curves, AP/AR, threshold tables.

Matching follows the usual detection-benchmark discipline: detections are
taken in descending score order and each grabs the not-yet-matched ground
truth with the highest IoU on its image, provided that IoU reaches the
threshold. Average precision is the 101-point interpolation (mean over
recall grid {0.00, 0.01, ..., 1.00} of the highest precision attained at or
beyond that recall), and the range variants average over IoU thresholds
0.50:0.05:0.95 with recall capped at 100 detections per image.

Several reported quantities are undefined on empty inputs; these come back
as 0.0 and the bundled report flags the condition rather than hiding it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cocostore import CocoDataset, Detection
from .errors import DatasetError
from .maskgeom import BBox, SegMask, iou_bbox, iou_mask

# Shared grids. Built from integer ratios so thresholds compare exactly
# against values like 0.55 written elsewhere as literals.
IOU_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))
RECALL_GRID = tuple(i / 100 for i in range(101))
MAX_DETECTIONS_PER_IMAGE = 100


@dataclass(frozen=True)
class GtInstance:
    """One ground-truth object under evaluation."""

    gt_id: int
    image_id: int
    bbox: BBox
    mask: SegMask | None = None


@dataclass(frozen=True)
class DetOutcome:
    """A detection's fate after matching, in global score order."""

    image_id: int
    score: float
    matched_gt: int | None
    iou: float


@dataclass(frozen=True)
class MatchResult:
    detections: tuple[DetOutcome, ...]
    gt_count: int
    iou_threshold: float
    iou_kind: str


@dataclass(frozen=True)
class PRCurve:
    """Precision/recall at each prefix of the score-ranked detection list."""

    points: tuple[tuple[float, float], ...]  # (recall, precision), one per rank
    support: int

    @property
    def undefined(self) -> bool:
        return self.support == 0


def gts_from_dataset(ds: CocoDataset, category_id: int | None = None) -> list[GtInstance]:
    """Flatten a dataset's annotations for evaluation, optionally one category."""
    out = []
    for ann in ds.annotations:
        if category_id is not None and ann.get("category_id") != category_id:
            continue
        mask = None
        if "segmentation" in ann:
            mask = ds.segmask_for(ann)
        out.append(
            GtInstance(
                gt_id=ann["id"],
                image_id=ann["image_id"],
                bbox=BBox.from_list(ann["bbox"]),
                mask=mask,
            )
        )
    return out


class _IouCache:
    """Decodes segmentation grids at most once per instance."""

    def __init__(self, kind: str):
        if kind not in ("bbox", "mask"):
            raise DatasetError(f"iou kind must be 'bbox' or 'mask', got {kind!r}")
        self.kind = kind
        self._grids: dict[int, np.ndarray] = {}

    def _grid(self, obj, key):
        if key not in self._grids:
            if obj is None:
                raise DatasetError("mask IoU requested but instance has no segmentation")
            self._grids[key] = obj.to_grid()
        return self._grids[key]

    def iou(self, det: Detection, det_key, gt: GtInstance) -> float:
        if self.kind == "bbox":
            return iou_bbox(det.bbox, gt.bbox)
        return iou_mask(self._grid(det.segmentation, det_key), self._grid(gt.mask, ("g", gt.gt_id)))


def _flatten(dets: dict[int, list[Detection]]) -> list[tuple[int, int, Detection]]:
    """Detections in deterministic (image id, input position) order."""
    flat = []
    for image_id in sorted(dets):
        for pos, det in enumerate(dets[image_id]):
            flat.append((image_id, pos, det))
    return flat


def match(gts: list[GtInstance], dets: dict[int, list[Detection]], iou_threshold: float,
          iou_kind: str = "bbox", max_per_image: int | None = None) -> MatchResult:
    """Greedy one-to-one matching of detections to ground truth.

    Per image, detections are visited by descending score (ties keep input
    order) and claim the unmatched ground truth of highest IoU when that IoU
    meets the threshold. The returned outcomes are globally sorted the same
    way so PR curves can be read off directly.

    Args:
        max_per_image: keep only the top-N detections per image by score
            before matching (the AR cap); None keeps everything.
    """
    cache = _IouCache(iou_kind)
    gts_by_image: dict[int, list[GtInstance]] = {}
    for gt in gts:
        gts_by_image.setdefault(gt.image_id, []).append(gt)

    outcomes: list[tuple[float, int, int, DetOutcome]] = []
    for image_id in sorted(dets):
        image_dets = list(enumerate(dets[image_id]))
        image_dets.sort(key=lambda item: (-item[1].score, item[0]))
        if max_per_image is not None:
            image_dets = image_dets[:max_per_image]
        taken: set[int] = set()
        candidates = gts_by_image.get(image_id, [])
        for pos, det in image_dets:
            best_iou = 0.0
            best_gt = None
            for gt in candidates:
                if gt.gt_id in taken:
                    continue
                iou = cache.iou(det, ("d", image_id, pos), gt)
                if iou > best_iou:
                    best_iou = iou
                    best_gt = gt
            if best_gt is not None and best_iou >= iou_threshold:
                taken.add(best_gt.gt_id)
                outcomes.append(
                    (det.score, image_id, pos,
                     DetOutcome(image_id, det.score, best_gt.gt_id, best_iou))
                )
            else:
                outcomes.append(
                    (det.score, image_id, pos, DetOutcome(image_id, det.score, None, best_iou))
                )
    # Global rank order: score descending, then image id, then input position.
    outcomes.sort(key=lambda item: (-item[0], item[1], item[2]))
    return MatchResult(
        detections=tuple(o for *_ignored, o in outcomes),
        gt_count=len(gts),
        iou_threshold=iou_threshold,
        iou_kind=iou_kind,
    )


def pr_curve(result: MatchResult) -> PRCurve:
    """Precision/recall over prefixes of the ranked detection list."""
    if result.gt_count == 0:
        return PRCurve(points=(), support=0)
    tp = 0
    points = []
    for rank, outcome in enumerate(result.detections, start=1):
        if outcome.matched_gt is not None:
            tp += 1
        points.append((tp / result.gt_count, tp / rank))
    return PRCurve(points=tuple(points), support=result.gt_count)


def average_precision(curve: PRCurve) -> float:
    """101-point interpolated AP; 0.0 for an empty or unsupported curve."""
    if not curve.points or curve.support == 0:
        return 0.0
    recalls = np.array([r for r, _ in curve.points])
    precisions = np.array([p for _, p in curve.points])
    # Highest precision at or beyond each rank; recall is nondecreasing.
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    total = 0.0
    for r in RECALL_GRID:
        idx = int(np.searchsorted(recalls, r, side="left"))
        if idx < len(recalls):
            total += float(envelope[idx])
    return total / len(RECALL_GRID)


def ap_at(gts: list[GtInstance], dets: dict[int, list[Detection]], iou_threshold: float,
          iou_kind: str = "bbox") -> float:
    return average_precision(pr_curve(match(gts, dets, iou_threshold, iou_kind)))


def ap_range(gts, dets, iou_kind: str = "bbox") -> float:
    """Mean AP over IoU thresholds 0.50:0.05:0.95."""
    return float(
        np.mean([ap_at(gts, dets, t, iou_kind) for t in IOU_THRESHOLDS])
    )


def recall_at(gts, dets, iou_threshold: float, iou_kind: str = "bbox") -> float:
    """Recall using every detection, capped at 100 per image."""
    if not gts:
        return 0.0
    result = match(gts, dets, iou_threshold, iou_kind, max_per_image=MAX_DETECTIONS_PER_IMAGE)
    matched = sum(1 for o in result.detections if o.matched_gt is not None)
    return matched / result.gt_count


def ar_range(gts, dets, iou_kind: str = "bbox") -> float:
    """Mean recall over IoU thresholds 0.50:0.05:0.95 (100-detection cap)."""
    return float(
        np.mean([recall_at(gts, dets, t, iou_kind) for t in IOU_THRESHOLDS])
    )


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean; 0.0 when both inputs are zero."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ThresholdRow:
    """Metrics after discarding detections below a confidence cutoff.

    support is the full ground-truth count and is constant across rows.
    support_detected_images counts only ground truths on images that still
    have at least one detection after the cutoff; it is reported as a
    diagnostic for datasets where whole images drop out at high cutoffs.
    """

    tau: float
    precision: float
    recall: float
    f1: float
    support: int
    support_detected_images: int


def prf_at_confidence(gts: list[GtInstance], dets: dict[int, list[Detection]], tau: float,
                      iou_threshold: float = 0.5, iou_kind: str = "bbox") -> ThresholdRow:
    """Precision/recall/F1 counting only detections with score >= tau.

    Precision is defined as 0.0 when the cutoff removes every detection.
    """
    kept = {
        image_id: [d for d in image_dets if d.score >= tau]
        for image_id, image_dets in dets.items()
    }
    kept = {k: v for k, v in kept.items() if v}
    result = match(gts, kept, iou_threshold, iou_kind)
    tp = sum(1 for o in result.detections if o.matched_gt is not None)
    n_kept = len(result.detections)
    precision = tp / n_kept if n_kept else 0.0
    recall = tp / result.gt_count if result.gt_count else 0.0
    detected_images = set(kept)
    support_detected = sum(1 for gt in gts if gt.image_id in detected_images)
    return ThresholdRow(
        tau=tau,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        support=len(gts),
        support_detected_images=support_detected,
    )


def threshold_table(gts, dets, taus=(0.3, 0.5, 0.7), iou_threshold: float = 0.5,
                    iou_kind: str = "bbox") -> list[ThresholdRow]:
    return [prf_at_confidence(gts, dets, tau, iou_threshold, iou_kind) for tau in taus]


@dataclass
class EvalReport:
    """Everything the det-eval report emits, JSON-ready via to_dict()."""

    ap50: float
    ap_range: float
    ar_range: float
    thresholds: list[ThresholdRow]
    curves: list[tuple[float, PRCurve]]  # (iou threshold, curve)
    gt_count: int
    iou_kind: str
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ap50": self.ap50,
            "ap_range": self.ap_range,
            "ar_range": self.ar_range,
            "thresholds": [
                {
                    "tau": row.tau,
                    "precision": row.precision,
                    "recall": row.recall,
                    "f1": row.f1,
                    "support": row.support,
                    "support_detected_images": row.support_detected_images,
                }
                for row in self.thresholds
            ],
            "curves": [
                {"iou": iou, "points": [[r, p] for r, p in curve.points]}
                for iou, curve in self.curves
            ],
            "gt_count": self.gt_count,
            "iou_kind": self.iou_kind,
            "flags": self.flags,
        }


def evaluate(ds: CocoDataset, dets: dict[int, list[Detection]], iou_kind: str = "bbox",
             category: str | None = None, taus=(0.3, 0.5, 0.7),
             table_iou: float = 0.5) -> EvalReport:
    """Full evaluation bundle for one results file against one dataset."""
    category_id = None
    if category is not None:
        category_id = ds.category_id_by_name(category)
    gts = gts_from_dataset(ds, category_id)
    if category_id is not None:
        dets = {
            image_id: [d for d in image_dets if d.category_id == category_id]
            for image_id, image_dets in dets.items()
        }
    flags = {}
    if not gts:
        flags["no_ground_truth"] = True
    if not any(dets.values()):
        flags["no_detections"] = True
    curves = [(t, pr_curve(match(gts, dets, t, iou_kind))) for t in IOU_THRESHOLDS]
    ap_by_threshold = {t: average_precision(c) for t, c in curves}
    return EvalReport(
        ap50=ap_by_threshold[0.5],
        ap_range=float(np.mean(list(ap_by_threshold.values()))),
        ar_range=ar_range(gts, dets, iou_kind),
        thresholds=threshold_table(gts, dets, taus, table_iou, iou_kind),
        curves=curves,
        gt_count=len(gts),
        iou_kind=iou_kind,
        flags=flags,
    )
