"""Shared fixtures: a 32-patch toy dataset and one trained run.

The dataset uses 64px patches so CPU runs stay fast; nothing in the
stage contract depends on patch size. The trained run executes the full
metis-s112-p224 schedule once per session and is shared by the trainer,
export, and acceptance tests.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from trainkit.schedules import preset
from trainkit.train import train

PATCH = 64
SPLIT_SIZES = {"train": 16, "val": 8, "test": 8}


def _patch_pixels(rng: np.random.Generator, index: int, label: bool) -> np.ndarray:
    """Structured pseudo-content so patches are visually distinct."""
    base = rng.integers(40, 216, (PATCH, PATCH, 3), dtype=np.uint8)
    if label:
        # dark blob in the middle, roughly what a defect crop looks like
        yy, xx = np.mgrid[0:PATCH, 0:PATCH]
        blob = (yy - PATCH // 2) ** 2 + (xx - PATCH // 2) ** 2 < (8 + index) ** 2
        base[blob] = base[blob] // 4
    return base


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory) -> Path:
    """Write 32 patches plus manifest; returns the dataset root."""
    root = tmp_path_factory.mktemp("toy_dataset")
    rng = np.random.default_rng(20240819)
    lines = [json.dumps({
        "tool": "fixture",
        "kind": "patch-manifest",
        "dataset_name": "HiCC/toy-s64-p64",
    }, sort_keys=True)]
    index = 0
    for split, count in SPLIT_SIZES.items():
        split_dir = root / "patches" / split
        split_dir.mkdir(parents=True)
        for i in range(count):
            label = i % 2 == 0
            x, y = (index % 8) * PATCH, (index // 8) * PATCH
            patch_id = f"toy_scene_{x}_{y}"
            Image.fromarray(_patch_pixels(rng, i, label)).save(
                split_dir / f"{patch_id}.png")
            lines.append(json.dumps({
                "patch_id": patch_id,
                "source_image": "scene.png",
                "x": x, "y": y, "w": PATCH, "h": PATCH,
                "label": label,
                "mask_area_px": 600 + 10 * i if label else 0,
                "split": split,
                "origin": "toy",
            }, sort_keys=True))
            index += 1
    (root / "manifest.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root


@pytest.fixture(scope="session")
def trained_run(toy_dataset, tmp_path_factory):
    """One full metis-s112-p224 run; returns (result, elapsed_seconds)."""
    out_dir = tmp_path_factory.mktemp("trained_run")
    started = time.time()
    result = train(toy_dataset / "manifest.jsonl", out_dir,
                   preset("metis-s112-p224"), seed=7)
    return result, time.time() - started


@pytest.fixture(scope="session")
def scene_image(tmp_path_factory) -> Path:
    """A 2x2-window source image for CAM export."""
    path = tmp_path_factory.mktemp("scene") / "scene.png"
    rng = np.random.default_rng(11)
    pixels = rng.integers(0, 255, (2 * PATCH, 2 * PATCH, 3), dtype=np.uint8)
    Image.fromarray(pixels).save(path)
    return path
