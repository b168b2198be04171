"""Export model outputs in the toolkit's interchange formats.

Two artifact kinds leave this package: score files (JSON lines, one
{"patch_id", "score"} object per manifest row, scores in [0, 1]) and
.camt tensor files (magic "CAMT", little-endian u32 header length,
UTF-8 JSON header {"k", "hc", "wc", "window": [x, y, w, h], "order":
"activations_then_gradients"}, then 2*k*hc*wc float32 little-endian
values, activations first). Both formats are written from their
documented shape so any compliant consumer can read them.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from trainkit import TrainkitError, __version__
from trainkit.augment import eval_transform, load_patch_tensor
from trainkit.manifest import patch_file, read_patch_manifest
from trainkit.model import load_checkpoint

CAMT_MAGIC = b"CAMT"
CAMT_ORDER = "activations_then_gradients"


def export_scores(checkpoint_path: str | Path, manifest_path: str | Path,
                  out_path: str | Path, batch_size: int = 32,
                  device: str = "cpu") -> int:
    """Score every manifest row and write a JSONL score file.

    Rows are scored in manifest order with a header line first, so
    repeat exports of the same checkpoint are byte-identical.

    Returns:
        Number of patches scored.
    """
    manifest_path = Path(manifest_path)
    out_path = Path(out_path)
    model, _ = load_checkpoint(checkpoint_path)
    model = model.to(device)
    header, rows = read_patch_manifest(manifest_path)

    transform = eval_transform()
    lines = [json.dumps({
        "tool": "trainkit",
        "version": __version__,
        "kind": "patch-scores",
        "checkpoint": Path(checkpoint_path).name,
        "dataset_name": header.get("dataset_name"),
    }, sort_keys=True)]
    with torch.no_grad():
        for start in range(0, len(rows), batch_size):
            chunk = rows[start:start + batch_size]
            tensors = []
            for row in chunk:
                path = patch_file(manifest_path.parent, row)
                if not path.is_file():
                    raise TrainkitError(f"patch file missing: {path}")
                tensors.append(load_patch_tensor(path, transform))
            logits = model(torch.stack(tensors).to(device))
            scores = torch.sigmoid(logits).squeeze(1).cpu()
            for row, score in zip(chunk, scores.tolist()):
                lines.append(json.dumps(
                    {"patch_id": row.patch_id, "score": score}, sort_keys=True))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(rows)


def window_positions(extent: int, patch: int, stride: int,
                     edge_anchored: bool) -> list[int]:
    """Window origins along one axis: stride steps, optional edge anchor."""
    if extent < patch:
        return []
    positions = list(range(0, extent - patch + 1, stride))
    if edge_anchored and positions and positions[-1] != extent - patch:
        positions.append(extent - patch)
    return positions


def write_camt_file(path: str | Path, window: tuple[int, int, int, int],
                    activations: np.ndarray, gradients: np.ndarray) -> None:
    """Write one window's tensors in the .camt binary layout."""
    act = np.ascontiguousarray(activations, dtype="<f4")
    grad = np.ascontiguousarray(gradients, dtype="<f4")
    if act.shape != grad.shape or act.ndim != 3:
        raise TrainkitError(f"tensor shapes disagree: {act.shape} vs {grad.shape}")
    k, hc, wc = act.shape
    header = {
        "k": int(k),
        "hc": int(hc),
        "wc": int(wc),
        "window": [int(v) for v in window],
        "order": CAMT_ORDER,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CAMT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(act.tobytes())
        fh.write(grad.tobytes())


def _window_tensors(model, tensor: torch.Tensor):
    """Forward/backward one patch; return (activations, gradients, score).

    Activations are the final feature maps; gradients are of the single
    logit with respect to those maps, which is what class-activation
    weighting needs.
    """
    captured: list[torch.Tensor] = []

    def grab(_module, _inputs, output):
        output.retain_grad()
        captured.append(output)

    handle = model.features.register_forward_hook(grab)
    try:
        model.zero_grad(set_to_none=True)
        # Weights stay frozen; a grad-requiring input builds the graph
        # so the backward pass reaches the feature maps.
        logit = model(tensor.unsqueeze(0).requires_grad_(True))
        logit.squeeze().backward()
    finally:
        handle.remove()
    acts = captured[0]
    grads = acts.grad
    if grads is None:
        grads = torch.zeros_like(acts)
    score = float(torch.sigmoid(logit.detach()).squeeze())
    return (acts.detach()[0].cpu().numpy(),
            grads.detach()[0].cpu().numpy(), score)


def export_cams(checkpoint_path: str | Path, image_path: str | Path,
                out_dir: str | Path, patch_size: int = 224, stride: int = 224,
                edge_anchored: bool = False, device: str = "cpu") -> list[Path]:
    """Slide the trained model over an image and write one .camt per window.

    Files are named <stem>_<x>_<y>.camt; a sidecar windows.json records
    the grid and each window's score.

    Returns:
        Paths of the written .camt files, grid order (y outer, x inner).
    """
    image_path = Path(image_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, _ = load_checkpoint(checkpoint_path)
    model = model.to(device)
    # Gradients flow to the feature maps, not the weights.
    for p in model.parameters():
        p.requires_grad_(False)

    try:
        with Image.open(image_path) as img:
            pixels = img.convert("RGB")
    except OSError as exc:
        raise TrainkitError(f"cannot read image {image_path}: {exc}") from exc
    width, height = pixels.size
    xs = window_positions(width, patch_size, stride, edge_anchored)
    ys = window_positions(height, patch_size, stride, edge_anchored)
    if not xs or not ys:
        raise TrainkitError(
            f"{image_path}: image {width}x{height} is smaller than one "
            f"{patch_size}px window")

    transform = eval_transform()
    written: list[Path] = []
    records = []
    for y in ys:
        for x in xs:
            crop = pixels.crop((x, y, x + patch_size, y + patch_size))
            acts, grads, score = _window_tensors(model, transform(crop).to(device))
            out_path = out_dir / f"{image_path.stem}_{x}_{y}.camt"
            write_camt_file(out_path, (x, y, patch_size, patch_size), acts, grads)
            written.append(out_path)
            records.append({"file": out_path.name, "x": x, "y": y,
                            "w": patch_size, "h": patch_size, "score": score})
    (out_dir / "windows.json").write_text(
        json.dumps({"image": image_path.name, "windows": records},
                   indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return written
