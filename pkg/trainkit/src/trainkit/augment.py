"""Train-time image augmentation.

Color jitter (brightness, contrast, saturation) plus a JPEG recompress
whose quality is drawn uniformly from an inclusive range per sample.
The recompress happens in memory; patch files on disk stay lossless.
All transforms preserve the input size, so a p-by-p patch stays p-by-p.
"""

from __future__ import annotations

import io
import random

import torch
from PIL import Image
from torchvision import transforms

from trainkit.schedules import AugmentSpec

# Standard ImageNet input statistics, matching the backbone's pretraining.
NORM_MEAN = (0.485, 0.456, 0.406)
NORM_STD = (0.229, 0.224, 0.225)


class JpegRecompress:
    """Encode to JPEG at a drawn quality and decode back.

    Quality is sampled per call via the supplied rng so tests can pin
    the sequence without touching torch's global generator.
    """

    def __init__(self, spec: AugmentSpec, rng: random.Random):
        self.spec = spec
        self.rng = rng
        self.drawn: list[int] = []  # qualities used, in call order

    def __call__(self, img: Image.Image) -> Image.Image:
        quality = self.spec.draw_jpeg_quality(self.rng)
        self.drawn.append(quality)
        buf = io.BytesIO()
        img.convert("RGB").save(buf, format="JPEG", quality=quality)
        buf.seek(0)
        out = Image.open(buf)
        out.load()
        return out


def build_train_transform(spec: AugmentSpec, rng: random.Random):
    """PIL image -> normalized float tensor, with augmentation.

    Returns:
        (transform, recompress) where recompress.drawn records the JPEG
        qualities used, in order.
    """
    recompress = JpegRecompress(spec, rng)
    transform = transforms.Compose([
        transforms.ColorJitter(
            brightness=spec.brightness,
            contrast=spec.contrast,
            saturation=spec.saturation,
        ),
        recompress,
        transforms.ToTensor(),
        transforms.Normalize(NORM_MEAN, NORM_STD),
    ])
    return transform, recompress


def eval_transform():
    """PIL image -> normalized float tensor, no augmentation."""
    return transforms.Compose([
        transforms.ToTensor(),
        transforms.Normalize(NORM_MEAN, NORM_STD),
    ])


def load_patch_tensor(path, transform=None) -> torch.Tensor:
    """Load one patch file as a (3, h, w) float tensor."""
    tf = transform or eval_transform()
    with Image.open(path) as img:
        return tf(img.convert("RGB"))
