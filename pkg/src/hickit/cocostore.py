"""COCO-format storage: ground truth, detection results, splits, merges.

Files are plain COCO JSON. Unknown keys on images, annotations, and
categories ride along untouched so a load/save cycle of a canonically
formatted file is byte-identical. Validation is limited to the invariants
the rest of the toolkit depends on: unique ids, resolvable references,
positive annotation area, and boxes inside their image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DatasetError
from .maskgeom import BBox, SegMask

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class CocoDataset:
    """An in-memory COCO ground-truth file.

    The three record lists hold the raw dicts from disk (or built in memory),
    preserving any extra keys. ``extra`` keeps unrecognized top-level fields.
    """

    images: list[dict] = field(default_factory=list)
    annotations: list[dict] = field(default_factory=list)
    categories: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def image_by_id(self, image_id: int) -> dict:
        try:
            return self._image_index[image_id]
        except (AttributeError, KeyError):
            # (Re)build the index; covers first use and post-construction edits.
            self._image_index = {im["id"]: im for im in self.images}
        try:
            return self._image_index[image_id]
        except KeyError:
            raise DatasetError(f"unknown image id {image_id}") from None

    def annotations_for(self, image_id: int) -> list[dict]:
        return [a for a in self.annotations if a["image_id"] == image_id]

    def category_id_by_name(self, name: str) -> int:
        for cat in self.categories:
            if cat.get("name") == name:
                return cat["id"]
        raise DatasetError(f"no category named {name!r}")

    def segmask_for(self, ann: dict) -> SegMask:
        im = self.image_by_id(ann["image_id"])
        return SegMask.from_coco(ann["segmentation"], (im["height"], im["width"]))

    def validate(self) -> None:
        """Check the referential and geometric invariants. Raises DatasetError."""
        image_ids = [im.get("id") for im in self.images]
        if len(set(image_ids)) != len(image_ids):
            dupes = sorted({i for i in image_ids if image_ids.count(i) > 1})
            raise DatasetError(f"duplicate image ids: {dupes}")
        ann_ids = [a.get("id") for a in self.annotations]
        if len(set(ann_ids)) != len(ann_ids):
            dupes = sorted({i for i in ann_ids if ann_ids.count(i) > 1})
            raise DatasetError(f"duplicate annotation ids: {dupes}")
        cat_ids = {c.get("id") for c in self.categories}
        if len(cat_ids) != len(self.categories):
            raise DatasetError("duplicate category ids")

        known_images = set(image_ids)
        bad_refs = []
        bad_geom = []
        for ann in self.annotations:
            if ann.get("image_id") not in known_images:
                bad_refs.append(ann.get("id"))
                continue
            if self.categories and ann.get("category_id") not in cat_ids:
                bad_refs.append(ann.get("id"))
                continue
            im = self.image_by_id(ann["image_id"])
            x, y, w, h = ann.get("bbox", [0, 0, 0, 0])
            if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > im["width"] or y + h > im["height"]:
                bad_geom.append(ann.get("id"))
            elif ann.get("area", 1) <= 0:
                bad_geom.append(ann.get("id"))
        if bad_refs:
            raise DatasetError(f"annotations referencing unknown image/category ids: {bad_refs}")
        if bad_geom:
            raise DatasetError(f"annotations with empty area or out-of-bounds bbox: {bad_geom}")


def load_dataset(path: str | Path) -> CocoDataset:
    """Load and validate a COCO ground-truth JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(raw, dict):
        raise DatasetError(f"{path}: top level must be a JSON object")
    for key in ("images", "annotations", "categories"):
        if key not in raw or not isinstance(raw[key], list):
            raise DatasetError(f"{path}: missing or non-list field {key!r}")
    ds = CocoDataset(
        images=raw["images"],
        annotations=raw["annotations"],
        categories=raw["categories"],
        extra={k: v for k, v in raw.items() if k not in ("images", "annotations", "categories")},
    )
    try:
        ds.validate()
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from exc
    return ds


def save_dataset(ds: CocoDataset, path: str | Path) -> None:
    """Write a dataset back to canonical JSON (sorted keys, compact separators)."""
    payload = dict(ds.extra)
    payload["images"] = ds.images
    payload["annotations"] = ds.annotations
    payload["categories"] = ds.categories
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, separators=(",", ":")), encoding="utf-8"
    )


@dataclass(frozen=True)
class Detection:
    """One scored detection from a results file."""

    image_id: int
    category_id: int
    bbox: BBox
    score: float
    segmentation: SegMask | None = None


def load_results(path: str | Path, ds: CocoDataset) -> dict[int, list[Detection]]:
    """Load a COCO results array and group detections per image, order preserved.

    Args:
        path: results JSON, a list of {image_id, category_id, bbox, score, segmentation?}.
        ds: ground-truth dataset used to resolve image sizes and check references.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(raw, list):
        raise DatasetError(f"{path}: results must be a JSON array")
    known = {im["id"] for im in ds.images}
    out: dict[int, list[Detection]] = {}
    for i, entry in enumerate(raw):
        where = f"{path}: result[{i}]"
        if not isinstance(entry, dict):
            raise DatasetError(f"{where}: not an object")
        try:
            image_id = entry["image_id"]
            score = float(entry["score"])
            bbox = BBox.from_list(entry["bbox"])
            category_id = entry["category_id"]
        except KeyError as exc:
            raise DatasetError(f"{where}: missing field {exc.args[0]!r}") from exc
        if image_id not in known:
            raise DatasetError(f"{where}: unknown image_id {image_id}")
        if not 0.0 <= score <= 1.0:
            raise DatasetError(f"{where}: score {score} outside [0, 1]")
        seg = None
        if "segmentation" in entry:
            im = ds.image_by_id(image_id)
            seg = SegMask.from_coco(entry["segmentation"], (im["height"], im["width"]))
        out.setdefault(image_id, []).append(
            Detection(image_id=image_id, category_id=category_id, bbox=bbox, score=score,
                      segmentation=seg)
        )
    return out


class SplitRng:
    """64-bit linear congruential generator, fixed constants, for portable shuffles.

    state' = state * 6364136223846793005 + 1442695040888963407 (mod 2**64);
    each draw returns the top 32 bits. Any implementation following this
    recurrence reproduces the same splits for the same seed.
    """

    MULT = 6364136223846793005
    INC = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u32(self) -> int:
        self.state = (self.state * self.MULT + self.INC) & self.MASK
        return self.state >> 32

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, high-to-low, index = draw mod (i + 1)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u32() % (i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for val and test; train absorbs the remainder.

    Sizes are round-half-up(fraction * n); every image lands in exactly one
    split, and rerunning with the same seed reproduces the same partition.
    """

    val: float = 0.2
    test: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.val < 0 or self.test < 0 or self.val + self.test > 1.0:
            raise DatasetError(f"split fractions invalid: val={self.val}, test={self.test}")


def split_dataset(ds: CocoDataset, spec: SplitSpec) -> dict[str, CocoDataset]:
    """Partition a dataset image-wise into train/val/test subsets."""
    ids = sorted(im["id"] for im in ds.images)
    n = len(ids)
    n_val = int(spec.val * n + 0.5)
    n_test = int(spec.test * n + 0.5)
    n_train = n - n_val - n_test
    rng = SplitRng(spec.seed)
    rng.shuffle(ids)
    assignment = {
        "train": set(ids[:n_train]),
        "val": set(ids[n_train : n_train + n_val]),
        "test": set(ids[n_train + n_val :]),
    }
    out = {}
    for name in SPLIT_NAMES:
        keep = assignment[name]
        out[name] = CocoDataset(
            images=[im for im in ds.images if im["id"] in keep],
            annotations=[a for a in ds.annotations if a["image_id"] in keep],
            categories=list(ds.categories),
            extra=dict(ds.extra),
        )
    return out


def merge_datasets(a: CocoDataset, b: CocoDataset, origin_a: str = "a",
                   origin_b: str = "b") -> CocoDataset:
    """Concatenate two datasets with fresh ids and per-image provenance.

    Categories are unified by name. Image and annotation ids are renumbered
    sequentially (a first, then b) so the result never collides. Each image
    gains an ``origin`` tag naming its source dataset; images that already
    carry one keep it, which makes repeated merges stable.
    """
    merged = CocoDataset()
    cat_ids: dict[str, int] = {}
    remap_cat: dict[tuple[int, int], int] = {}  # (source index, old id) -> new id
    for src_idx, src in enumerate((a, b)):
        for cat in src.categories:
            name = cat.get("name")
            if name not in cat_ids:
                cat_ids[name] = len(cat_ids) + 1
                new_cat = dict(cat)
                new_cat["id"] = cat_ids[name]
                merged.categories.append(new_cat)
            remap_cat[(src_idx, cat["id"])] = cat_ids[name]

    next_image = 1
    next_ann = 1
    for src_idx, (src, origin) in enumerate(((a, origin_a), (b, origin_b))):
        remap_img = {}
        for im in src.images:
            new_im = dict(im)
            remap_img[im["id"]] = next_image
            new_im["id"] = next_image
            new_im.setdefault("origin", origin)
            merged.images.append(new_im)
            next_image += 1
        for ann in src.annotations:
            new_ann = dict(ann)
            new_ann["id"] = next_ann
            new_ann["image_id"] = remap_img[ann["image_id"]]
            new_ann["category_id"] = remap_cat[(src_idx, ann["category_id"])]
            merged.annotations.append(new_ann)
            next_ann += 1
    return merged
