"""Staged fine-tuning loop.

Training runs the three schedule stages in order, widening the
trainable set each time: head only, head plus last feature block, full
network. Each stage gets a fresh Adam optimizer with the stage learning
rate and the schedule's betas. Batches are plain BCE-with-logits on the
train split; there is no weight decay and no class re-balancing, and
every knob that matters ends up in the JSON log next to the weights.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn
from torch.utils.data import DataLoader, Dataset

from trainkit import TrainkitError, __version__
from trainkit.augment import build_train_transform, load_patch_tensor
from trainkit.manifest import PatchRow, patch_file, read_patch_manifest, split_rows
from trainkit.model import build_model, save_checkpoint, set_trainable
from trainkit.schedules import AugmentSpec, StageSchedule


class PatchDataset(Dataset):
    """Labeled patches of one split, loaded from PNG files."""

    def __init__(self, rows: list[PatchRow], root: Path, transform):
        self.rows = rows
        self.root = Path(root)
        self.transform = transform

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, idx: int):
        row = self.rows[idx]
        path = patch_file(self.root, row)
        if not path.is_file():
            raise TrainkitError(f"patch file missing: {path}")
        tensor = load_patch_tensor(path, self.transform)
        return tensor, torch.tensor([float(row.label)], dtype=torch.float32)


@dataclass(frozen=True)
class TrainResult:
    """Where a finished run left its artifacts."""

    checkpoint: Path
    log_path: Path
    log: dict


def train(manifest_path: str | Path, out_dir: str | Path, schedule: StageSchedule,
          augment: AugmentSpec | None = None, seed: int = 0, batch_size: int = 32,
          device: str = "cpu", pretrained: bool = False) -> TrainResult:
    """Run the full three-stage schedule and write artifacts.

    Args:
        manifest_path: patch manifest; patch files are resolved relative
            to its parent directory.
        out_dir: receives stage checkpoints, model.pt, training_log.json.
        schedule: the three-stage plan to execute.
        augment: train-split augmentation; defaults to AugmentSpec().
        seed: seeds torch, the JPEG-quality rng, and shuffling.
        batch_size: minibatch size (default 32).
        device: torch device string.
        pretrained: start the backbone from ImageNet weights.

    Returns:
        TrainResult with the final checkpoint path and the run log.
    """
    manifest_path = Path(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    augment = augment or AugmentSpec()

    header, rows = read_patch_manifest(manifest_path)
    train_rows = split_rows(rows, "train")
    if not train_rows:
        raise TrainkitError(f"{manifest_path}: no rows in the train split")

    torch.manual_seed(seed)
    rng = random.Random(seed)
    transform, recompress = build_train_transform(augment, rng)
    dataset = PatchDataset(train_rows, manifest_path.parent, transform)
    loader_gen = torch.Generator()
    loader_gen.manual_seed(seed)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=True,
                        num_workers=0, generator=loader_gen)

    model = build_model(pretrained=pretrained).to(device)
    loss_fn = nn.BCEWithLogitsLoss()
    total_params = sum(p.numel() for p in model.parameters())

    stage_logs = []
    started = time.time()
    for index, stage in enumerate(schedule.stages, start=1):
        params = set_trainable(model, stage.trainable_scope)
        optimizer = torch.optim.Adam(params, lr=stage.learning_rate,
                                     betas=schedule.betas, weight_decay=0.0)
        trainable = sum(p.numel() for p in params)
        epoch_losses = []
        model.train()
        for _ in range(stage.epochs):
            running, batches = 0.0, 0
            for inputs, targets in loader:
                inputs = inputs.to(device)
                targets = targets.to(device)
                optimizer.zero_grad()
                loss = loss_fn(model(inputs), targets)
                loss.backward()
                optimizer.step()
                running += float(loss.detach())
                batches += 1
            epoch_losses.append(running / max(batches, 1))
        stage_path = out_dir / f"stage{index}.pt"
        save_checkpoint(stage_path, model, meta={
            "stage": index, "scope": stage.trainable_scope,
        })
        stage_logs.append({
            "stage": index,
            "trainable_scope": stage.trainable_scope,
            "epochs": stage.epochs,
            "learning_rate": stage.learning_rate,
            "trainable_params": trainable,
            "trainable_tensors": len(params),
            "epoch_losses": epoch_losses,
            "checkpoint": stage_path.name,
        })

    final_path = out_dir / "model.pt"
    save_checkpoint(final_path, model, meta={
        "schedule": schedule.name, "seed": seed, "dataset": header.get("dataset_name"),
    })
    log = {
        "tool": "trainkit",
        "version": __version__,
        "schedule": schedule.name,
        "betas": list(schedule.betas),
        "batch_size": batch_size,
        "weight_decay": 0.0,
        "class_rebalancing": "none",
        "optimizer": "adam",
        "pretrained": pretrained,
        "seed": seed,
        "device": device,
        "dataset_name": header.get("dataset_name"),
        "train_rows": len(train_rows),
        "total_params": total_params,
        "jpeg_quality_range": list(augment.jpeg_quality),
        "jpeg_quality_drawn": {
            "count": len(recompress.drawn),
            "min": min(recompress.drawn) if recompress.drawn else None,
            "max": max(recompress.drawn) if recompress.drawn else None,
        },
        "elapsed_s": round(time.time() - started, 3),
        "stages": stage_logs,
    }
    log_path = out_dir / "training_log.json"
    log_path.write_text(json.dumps(log, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    return TrainResult(checkpoint=final_path, log_path=log_path, log=log)
