"""Sliding-window patch extraction and weak labeling from COCO ground truth.

Full-resolution inspection photos are cut into square windows on a regular
stride grid. A window is labeled positive when the union of defect masks
covers at least a configurable fraction of its area, which turns instance
segmentations into a binary patch classification dataset. Window placement
never crosses the image border: the grid truncates at the right and bottom,
and an optional edge-anchored pass adds one final column/row flush with the
border so no pixels are lost at exact-tiling strides.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import output_header
from .cocostore import CocoDataset, SPLIT_NAMES
from .errors import DatasetError, FormatError
from .maskgeom import BBox, mask_area_in_window

MANIFEST_KIND = "patch-manifest"


def worker_count() -> int:
    """Parallelism cap, taken from HIC_THREADS when set (min 1)."""
    raw = os.environ.get("HIC_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        n = os.cpu_count() or 1
    return n


@dataclass(frozen=True)
class PatchConfig:
    """Window geometry and labeling knobs.

    area_threshold is the fraction of window pixels that defect masks must
    cover for a positive label; 0.01 of a 224x224 window is ~502 pixels.
    """

    patch_size: int = 224
    stride: int = 224
    area_threshold: float = 0.01
    edge_anchored: bool = False
    origin: str = "data"

    def __post_init__(self):
        if self.patch_size <= 0:
            raise DatasetError(f"patch_size must be positive, got {self.patch_size}")
        if self.stride <= 0:
            raise DatasetError(f"stride must be positive, got {self.stride}")
        if not 0.0 <= self.area_threshold <= 1.0:
            raise DatasetError(f"area_threshold must be in [0, 1], got {self.area_threshold}")


@dataclass(frozen=True)
class PatchRecord:
    """One labeled window of one source image."""

    patch_id: str
    source_image: str
    x: int
    y: int
    w: int
    h: int
    label: bool
    mask_area_px: int
    split: str
    origin: str


def dataset_name(origin: str, stride: int, patch_size: int) -> str:
    """Canonical dataset identifier, e.g. 'HiCC/metis-s112-p224'."""
    return f"HiCC/{origin}-s{stride}-p{patch_size}"


def _axis_positions(extent: int, cfg: PatchConfig) -> list[int]:
    p, s = cfg.patch_size, cfg.stride
    if extent < p:
        return []
    positions = list(range(0, extent - p + 1, s))
    if cfg.edge_anchored and positions and positions[-1] != extent - p:
        positions.append(extent - p)
    return positions


def patch_grid(image_size: tuple[int, int], cfg: PatchConfig) -> list[BBox]:
    """Enumerate window placements for an image, row-major (y outer, x inner).

    Args:
        image_size: (width, height) of the source image in pixels.
        cfg: window geometry; only patch_size, stride, edge_anchored matter.

    Returns:
        Windows as BBox with integer coordinates; empty if the image is
        smaller than the patch size.
    """
    w, h = image_size
    xs = _axis_positions(w, cfg)
    ys = _axis_positions(h, cfg)
    p = cfg.patch_size
    return [BBox(x, y, p, p) for y in ys for x in xs]


def union_mask(masks, size: tuple[int, int]) -> np.ndarray:
    """Union of rasterized segmentations on one image grid.

    Overlapping instances are merged before any area is measured, so the
    same pixel never counts twice.
    """
    out = np.zeros(size, dtype=bool)
    for m in masks:
        grid = m.to_grid() if hasattr(m, "to_grid") else np.asarray(m, dtype=bool)
        if grid.shape != out.shape:
            raise DatasetError(f"mask grid {grid.shape} does not match image grid {out.shape}")
        out |= grid
    return out


def label_patch(window: BBox, defect_mask: np.ndarray, cfg: PatchConfig) -> tuple[bool, int]:
    """Label one window against the unioned defect mask.

    Returns (label, covered_pixels) where label is True iff the covered
    pixel count reaches area_threshold * patch_size**2.
    """
    area = mask_area_in_window(defect_mask, window)
    return area >= cfg.area_threshold * cfg.patch_size**2, area


def _image_stem(file_name: str) -> str:
    return Path(file_name).stem


def _records_for_image(im: dict, ds: CocoDataset, cfg: PatchConfig, split: str,
                       category_id: int | None) -> list[PatchRecord]:
    size = (im["height"], im["width"])
    anns = [a for a in ds.annotations if a["image_id"] == im["id"]]
    if category_id is not None:
        anns = [a for a in anns if a["category_id"] == category_id]
    defect = union_mask((ds.segmask_for(a) for a in anns), size)
    stem = _image_stem(im["file_name"])
    records = []
    for win in patch_grid((im["width"], im["height"]), cfg):
        label, area = label_patch(win, defect, cfg)
        x, y = int(win.x), int(win.y)
        records.append(
            PatchRecord(
                patch_id=f"{cfg.origin}_{stem}_{x}_{y}",
                source_image=im["file_name"],
                x=x,
                y=y,
                w=cfg.patch_size,
                h=cfg.patch_size,
                label=label,
                mask_area_px=area,
                split=split,
                origin=cfg.origin,
            )
        )
    return records


def enumerate_patches(datasets: dict[str, CocoDataset], cfg: PatchConfig,
                      category: str | None = "honeycomb") -> list[PatchRecord]:
    """Compute labeled window records for every image, without touching pixels.

    Labels depend only on annotation geometry and image dimensions, so this
    works from the COCO JSON alone. Records come back sorted by
    (split, source_image, y, x) for reproducible output.

    Args:
        datasets: split name -> dataset; keys must be train/val/test.
        cfg: window geometry and labeling thresholds.
        category: restrict defect masks to this category name; None means
            all annotations count. A named category that is absent from a
            dataset falls back to all annotations (single-class files often
            omit the name).
    """
    for name in datasets:
        if name not in SPLIT_NAMES:
            raise DatasetError(f"unknown split name {name!r}, expected one of {SPLIT_NAMES}")
    records: list[PatchRecord] = []
    for split, ds in datasets.items():
        cat_id = None
        if category is not None:
            try:
                cat_id = ds.category_id_by_name(category)
            except DatasetError:
                cat_id = None
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            per_image = pool.map(
                lambda im: _records_for_image(im, ds, cfg, split, cat_id), ds.images
            )
            for recs in per_image:
                records.extend(recs)
    records.sort(key=lambda r: (SPLIT_NAMES.index(r.split), r.source_image, r.y, r.x))
    return records


def generate(datasets: dict[str, CocoDataset], images_dir: str | Path, out_dir: str | Path,
             cfg: PatchConfig, category: str | None = "honeycomb",
             seed: int | None = None) -> Path:
    """Cut patch PNGs and write the manifest.

    Patch files land in out_dir/patches/<split>/ named
    '{origin}_{imageStem}_{x}_{y}.png', cropped losslessly from the source.
    Images that cannot be read are skipped; their names are recorded in the
    manifest header so the gap is visible downstream.

    Returns the manifest path (out_dir/manifest.jsonl).
    """
    from PIL import Image

    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    records = enumerate_patches(datasets, cfg, category)

    skipped: list[str] = []
    kept: list[PatchRecord] = []
    by_image: dict[str, list[PatchRecord]] = {}
    for rec in records:
        by_image.setdefault(rec.source_image, []).append(rec)

    def cut_one(item):
        file_name, recs = item
        src = images_dir / file_name
        try:
            with Image.open(src) as img:
                pixels = img.convert("RGB")
                split_dir = out_dir / "patches" / recs[0].split
                split_dir.mkdir(parents=True, exist_ok=True)
                for rec in recs:
                    crop = pixels.crop((rec.x, rec.y, rec.x + rec.w, rec.y + rec.h))
                    crop.save(split_dir / f"{rec.patch_id}.png", format="PNG")
            return file_name, recs
        except OSError:
            return file_name, None

    out_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for file_name, recs in pool.map(cut_one, sorted(by_image.items())):
            if recs is None:
                skipped.append(file_name)
            else:
                kept.extend(recs)
    kept.sort(key=lambda r: (SPLIT_NAMES.index(r.split), r.source_image, r.y, r.x))

    manifest = out_dir / "manifest.jsonl"
    write_manifest(manifest, kept, cfg, skipped_images=sorted(skipped), seed=seed)
    return manifest


def write_manifest(path: str | Path, records: list[PatchRecord], cfg: PatchConfig,
                   skipped_images: list[str] | None = None, seed: int | None = None) -> None:
    """Write header line plus one JSON record per line."""
    header = output_header("patchgen", asdict(cfg), seed=seed)
    header["kind"] = MANIFEST_KIND
    header["dataset_name"] = dataset_name(cfg.origin, cfg.stride, cfg.patch_size)
    header["skipped_images"] = skipped_images or []
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(asdict(r), sort_keys=True) for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> tuple[dict, list[PatchRecord]]:
    """Read a manifest back; returns (header, records)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line 1: invalid JSON: {exc.msg}") from exc
    if not isinstance(header, dict) or header.get("kind") != MANIFEST_KIND:
        raise FormatError(f"{path}: first line is not a {MANIFEST_KIND} header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(
                PatchRecord(
                    patch_id=raw["patch_id"],
                    source_image=raw["source_image"],
                    x=int(raw["x"]),
                    y=int(raw["y"]),
                    w=int(raw["w"]),
                    h=int(raw["h"]),
                    label=bool(raw["label"]),
                    mask_area_px=int(raw["mask_area_px"]),
                    split=raw["split"],
                    origin=raw["origin"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: line {lineno}: bad patch record: {exc}") from exc
    return header, records


def split_counts(records: list[PatchRecord]) -> dict[str, dict[str, int]]:
    """Per-split positive/negative patch counts.

    Returns {split: {"true": n, "false": n}} for train/val/test plus a
    "total" row.
    """
    counts = {name: {"true": 0, "false": 0} for name in SPLIT_NAMES}
    for rec in records:
        counts[rec.split]["true" if rec.label else "false"] += 1
    counts["total"] = {
        "true": sum(c["true"] for c in counts.values()),
        "false": sum(c["false"] for c in counts.values()),
    }
    return counts


def theta_sweep(records: list[PatchRecord], patch_size: int,
                thetas: list[float]) -> list[dict]:
    """Re-threshold existing records over several area fractions.

    Labels are monotone in the threshold, so one enumeration pass supports
    the whole sweep: a window is positive at theta iff its recorded
    mask_area_px reaches theta * patch_size**2.

    Returns one row per theta: {"theta", "per_split": {split: {true, false}},
    "total": {true, false}}.
    """
    rows = []
    for theta in thetas:
        cutoff = theta * patch_size**2
        counts = {name: {"true": 0, "false": 0} for name in SPLIT_NAMES}
        for rec in records:
            counts[rec.split]["true" if rec.mask_area_px >= cutoff else "false"] += 1
        rows.append(
            {
                "theta": theta,
                "per_split": counts,
                "total": {
                    "true": sum(c["true"] for c in counts.values()),
                    "false": sum(c["false"] for c in counts.values()),
                },
            }
        )
    return rows


def sweep_report(rows: list[dict], target: dict[str, dict[str, int]] | None = None) -> str:
    """Readable sweep table; optionally scores each theta against target counts.

    target maps split -> {"true": n, "false": n}. The distance column is the
    summed absolute count difference over the splits present in target.
    """
    out = ["theta      split    true    false"]
    best = None
    for row in rows:
        first = True
        for split in SPLIT_NAMES:
            c = row["per_split"][split]
            label = f"{row['theta']:<10.4%}" if first else " " * 10
            out.append(f"{label} {split:<8} {c['true']:>6} {c['false']:>8}")
            first = False
        if target is not None:
            dist = 0
            for split, want in target.items():
                got = row["per_split"][split]
                dist += abs(got["true"] - want["true"]) + abs(got["false"] - want["false"])
            out.append(f"{'':10} distance to target: {dist}")
            if best is None or dist < best[1]:
                best = (row["theta"], dist)
    if best is not None:
        out.append(f"closest theta: {best[0]:.4%} (distance {best[1]})")
    return "\n".join(out)
