"""Pixel-exact mask and box geometry.

Segmentations arrive either as polygon rings or as uncompressed run-length
counts. Both decode to a boolean pixel grid, and all overlap measures are
defined on that grid (masks) or on continuous box coordinates (boxes). The
conventions are pinned down here once so every consumer agrees:

* polygons rasterize by the even-odd rule tested at pixel centers
  (x + 0.5, y + 0.5); a pixel is set when its center is inside any ring;
* run-length counts are column-major and alternate background/foreground
  starting with background, summing to exactly width * height;
* IoU of two empty masks (or two degenerate boxes) is defined as 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, FormatError


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, COCO layout: top-left corner plus extent, in pixels."""

    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, raw) -> "BBox":
        if not isinstance(raw, (list, tuple)) or len(raw) != 4:
            raise DatasetError(f"bbox must be a 4-element [x, y, w, h] list, got {raw!r}")
        return cls(*(float(v) for v in raw))


@dataclass(frozen=True)
class SegMask:
    """A segmentation in either polygon or run-length form.

    Exactly one of ``polygons`` / ``counts`` is populated. ``size`` is
    (height, width) of the image grid the mask lives on.
    """

    size: tuple[int, int]
    polygons: tuple[tuple[float, ...], ...] | None = None
    counts: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.polygons is None) == (self.counts is None):
            raise DatasetError("segmentation must be polygon-form or RLE-form, not both or neither")
        if self.counts is not None:
            h, w = self.size
            total = sum(self.counts)
            if total != h * w:
                raise FormatError(
                    f"RLE counts sum to {total}, expected {h}*{w}={h * w} for size {self.size}"
                )
            if any(c < 0 for c in self.counts):
                raise FormatError("RLE counts must be non-negative")
        if self.polygons is not None:
            for ring in self.polygons:
                if len(ring) < 6 or len(ring) % 2 != 0:
                    raise DatasetError(
                        f"polygon ring needs an even count of >= 6 coordinates, got {len(ring)}"
                    )

    @classmethod
    def from_coco(cls, seg, size: tuple[int, int]) -> "SegMask":
        """Build from the raw ``segmentation`` field of a COCO annotation."""
        if isinstance(seg, dict):
            counts = seg.get("counts")
            rle_size = seg.get("size")
            if not isinstance(counts, list) or not isinstance(rle_size, list):
                raise DatasetError(f"RLE segmentation needs list 'counts' and 'size', got {seg!r}")
            if tuple(rle_size) != tuple(size):
                raise DatasetError(f"RLE size {rle_size} disagrees with image size {list(size)}")
            return cls(size=size, counts=tuple(int(c) for c in counts))
        if isinstance(seg, list):
            return cls(size=size, polygons=tuple(tuple(float(v) for v in ring) for ring in seg))
        raise DatasetError(f"unsupported segmentation payload: {type(seg).__name__}")

    def to_coco(self):
        if self.counts is not None:
            return {"counts": list(self.counts), "size": list(self.size)}
        return [list(ring) for ring in self.polygons]

    def to_grid(self) -> np.ndarray:
        """Decode to a boolean (height, width) pixel grid."""
        if self.counts is not None:
            return rle_decode(list(self.counts), self.size)
        return rasterize(self.polygons, self.size)


def rasterize(polygons, size: tuple[int, int]) -> np.ndarray:
    """Rasterize polygon rings onto a pixel grid.

    A pixel is set when its center lies inside any ring by the even-odd rule.
    Rings combine by union, so overlapping parts do not carve holes.

    Args:
        polygons: iterable of flat coordinate rings [x0, y0, x1, y1, ...].
        size: (height, width) of the target grid.

    Returns:
        Boolean array of shape (height, width).
    """
    h, w = size
    if h <= 0 or w <= 0:
        raise DatasetError(f"grid size must be positive, got {size}")
    out = np.zeros((h, w), dtype=bool)
    # Pixel-center coordinate planes, shared across rings.
    cx = np.arange(w, dtype=np.float64) + 0.5
    cy = np.arange(h, dtype=np.float64) + 0.5
    px = np.broadcast_to(cx, (h, w))
    py = np.broadcast_to(cy[:, None], (h, w))
    for ring in polygons:
        xs = np.asarray(ring[0::2], dtype=np.float64)
        ys = np.asarray(ring[1::2], dtype=np.float64)
        if xs.size < 3:
            raise DatasetError("polygon ring needs at least 3 vertices")
        inside = np.zeros((h, w), dtype=bool)
        x1, y1 = xs, ys
        x2, y2 = np.roll(xs, -1), np.roll(ys, -1)
        for ex1, ey1, ex2, ey2 in zip(x1, y1, x2, y2):
            if ey1 == ey2:
                continue  # horizontal edge never crosses a center ray
            straddles = (ey1 > py) != (ey2 > py)
            # x of the edge at the pixel-center scanline.
            xcross = (ex2 - ex1) * (py - ey1) / (ey2 - ey1) + ex1
            inside ^= straddles & (px < xcross)
        out |= inside
    return out


def rle_encode(grid: np.ndarray) -> list[int]:
    """Encode a boolean grid as column-major run lengths.

    Counts alternate background/foreground and always start with background,
    so a grid whose first column-major pixel is set yields a leading 0.
    """
    grid = np.asarray(grid, dtype=bool)
    if grid.ndim != 2:
        raise FormatError(f"expected a 2-D grid, got shape {grid.shape}")
    flat = grid.flatten(order="F")
    n = flat.size
    if n == 0:
        return [0]
    # Boundaries where the run value changes.
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [n]))
    runs = (ends - starts).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_decode(counts: list[int], size: tuple[int, int]) -> np.ndarray:
    """Decode column-major run lengths back to a boolean (height, width) grid."""
    h, w = size
    total = sum(counts)
    if total != h * w:
        raise FormatError(f"RLE counts sum to {total}, expected {h * w} for size ({h}, {w})")
    if any(c < 0 for c in counts):
        raise FormatError("RLE counts must be non-negative")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape((h, w), order="F")


def mask_area(grid: np.ndarray) -> int:
    """Number of set pixels."""
    return int(np.count_nonzero(grid))


def mask_area_in_window(grid: np.ndarray, window: BBox) -> int:
    """Set-pixel count inside a pixel-aligned window, clipped to the grid."""
    h, w = grid.shape
    x0 = max(0, int(window.x))
    y0 = max(0, int(window.y))
    x1 = min(w, int(window.x + window.w))
    y1 = min(h, int(window.y + window.h))
    if x1 <= x0 or y1 <= y0:
        return 0
    return int(np.count_nonzero(grid[y0:y1, x0:x1]))


def iou_bbox(a: BBox, b: BBox) -> float:
    """Continuous-area intersection over union of two boxes. Degenerate union -> 0."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(0.0, ix) * max(0.0, iy)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def iou_mask(a: np.ndarray, b: np.ndarray) -> float:
    """Set-based IoU of two boolean grids on the same image. Both empty -> 0."""
    if a.shape != b.shape:
        raise DatasetError(f"mask grids disagree in shape: {a.shape} vs {b.shape}")
    inter = np.count_nonzero(a & b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return float(inter) / float(union)
