"""Shared fixture builders for the test suite."""

from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

from hickit.cocostore import CocoDataset


def rect_ring(x, y, w, h):
    """Flat polygon ring for an axis-aligned rectangle."""
    return [x, y, x + w, y, x + w, y + h, x, y + h]


def make_dataset(images, annotations, category="honeycomb") -> CocoDataset:
    """Assemble a dataset from terse tuples.

    images: (id, width, height, file_name) tuples.
    annotations: (id, image_id, bbox, segmentation) tuples; segmentation may
    be polygon rings or an RLE dict, bbox is [x, y, w, h].
    """
    cat_id = 1
    ds = CocoDataset(
        images=[
            {"id": i, "width": w, "height": h, "file_name": name} for i, w, h, name in images
        ],
        annotations=[
            {
                "id": aid,
                "image_id": img,
                "category_id": cat_id,
                "bbox": list(bbox),
                "area": bbox[2] * bbox[3],
                "iscrowd": 0,
                "segmentation": seg,
            }
            for aid, img, bbox, seg in annotations
        ],
        categories=[{"id": cat_id, "name": category, "supercategory": "defect"}],
    )
    ds.validate()
    return ds


def write_coco(path, ds: CocoDataset) -> None:
    payload = dict(ds.extra)
    payload.update(images=ds.images, annotations=ds.annotations, categories=ds.categories)
    path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")), encoding="utf-8")


def save_noise_png(path, width, height, seed=0) -> np.ndarray:
    """Deterministic RGB noise image; returns the pixel array."""
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    Image.fromarray(pixels).save(path)
    return pixels


@pytest.fixture
def two_image_dataset() -> CocoDataset:
    """Two images, three annotations, all polygon-form."""
    return make_dataset(
        images=[(1, 448, 448, "slab_a.png"), (2, 300, 260, "slab_b.png")],
        annotations=[
            (10, 1, [16, 16, 96, 64], [rect_ring(16, 16, 96, 64)]),
            (11, 1, [200, 150, 60, 80], [rect_ring(200, 150, 60, 80)]),
            (12, 2, [32, 40, 128, 100], [rect_ring(32, 40, 128, 100)]),
        ],
    )
