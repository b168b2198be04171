"""Reader for patch dataset manifests.

A manifest is JSON-lines: a header object first (it carries a "tool"
key and no "patch_id"), then one record per labeled patch. Patch image
files live under <root>/patches/<split>/<patch_id>.png next to the
manifest. This module parses that layout from its documented shape; it
does not depend on whichever tool produced the files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from trainkit import TrainkitError


class ManifestError(TrainkitError):
    """A manifest file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class PatchRow:
    """One labeled patch: identity, window, label, bookkeeping."""

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


def read_patch_manifest(path: str | Path) -> tuple[dict, list[PatchRow]]:
    """Parse a manifest into (header, rows).

    Raises:
        ManifestError: empty file, bad JSON, or records missing fields.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    header: dict = {}
    rows: list[PatchRow] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ManifestError(f"{path}: line {lineno}: expected an object")
        if "patch_id" not in raw:
            if "tool" in raw and not rows:
                header = raw
                continue
            raise ManifestError(f"{path}: line {lineno}: missing patch_id")
        try:
            row = PatchRow(
                patch_id=str(raw["patch_id"]),
                source_image=str(raw["source_image"]),
                x=int(raw["x"]),
                y=int(raw["y"]),
                w=int(raw["w"]),
                h=int(raw["h"]),
                label=bool(raw["label"]),
                mask_area_px=int(raw["mask_area_px"]),
                split=str(raw["split"]),
                origin=str(raw["origin"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: line {lineno}: bad record: {exc}") from exc
        if row.patch_id in seen:
            raise ManifestError(
                f"{path}: line {lineno}: duplicate patch_id {row.patch_id!r}"
            )
        seen.add(row.patch_id)
        rows.append(row)
    if not rows:
        raise ManifestError(f"{path}: no patch records")
    return header, rows


def patch_file(root: str | Path, row: PatchRow) -> Path:
    """Path of the PNG crop for one manifest row."""
    return Path(root) / "patches" / row.split / f"{row.patch_id}.png"


def split_rows(rows: list[PatchRow], split: str) -> list[PatchRow]:
    """Rows belonging to one split, manifest order preserved."""
    return [r for r in rows if r.split == split]
