"""Score and .camt exports: format, determinism, interop."""

import json
import struct

import numpy as np
import pytest
import torch

from trainkit import TrainkitError
from trainkit.export import export_cams, export_scores, window_positions
from trainkit.manifest import read_patch_manifest
from trainkit.model import load_checkpoint, save_checkpoint

PATCH = 64


def parse_camt(path):
    """Independent .camt parser, straight from the documented layout."""
    data = path.read_bytes()
    assert data[:4] == b"CAMT"
    (header_len,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + header_len].decode("utf-8"))
    k, hc, wc = header["k"], header["hc"], header["wc"]
    body = np.frombuffer(data[8 + header_len:], dtype="<f4")
    assert body.size == 2 * k * hc * wc
    acts = body[:k * hc * wc].reshape(k, hc, wc)
    grads = body[k * hc * wc:].reshape(k, hc, wc)
    return header, acts, grads


@pytest.fixture(scope="module")
def score_file(trained_run, toy_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("scores") / "scores.jsonl"
    result, _ = trained_run
    count = export_scores(result.checkpoint, toy_dataset / "manifest.jsonl", out)
    return out, count


@pytest.fixture(scope="module")
def cam_dir(trained_run, scene_image, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("cams")
    result, _ = trained_run
    written = export_cams(result.checkpoint, scene_image, out_dir,
                          patch_size=PATCH, stride=PATCH)
    return out_dir, written


class TestScoreExport:
    def test_one_line_per_manifest_row_in_order(self, score_file, toy_dataset):
        out, count = score_file
        _, rows = read_patch_manifest(toy_dataset / "manifest.jsonl")
        lines = out.read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0])
        assert header["tool"] == "trainkit"
        assert "patch_id" not in header
        records = [json.loads(l) for l in lines[1:]]
        assert count == len(records) == len(rows)
        assert [r["patch_id"] for r in records] == [r.patch_id for r in rows]

    def test_scores_are_probabilities(self, score_file):
        out, _ = score_file
        for line in out.read_text(encoding="utf-8").splitlines()[1:]:
            assert 0.0 <= json.loads(line)["score"] <= 1.0

    def test_reexport_is_byte_identical(self, score_file, trained_run,
                                        toy_dataset, tmp_path):
        out, _ = score_file
        result, _ = trained_run
        again = tmp_path / "again.jsonl"
        export_scores(result.checkpoint, toy_dataset / "manifest.jsonl", again)
        assert again.read_bytes() == out.read_bytes()

    def test_missing_patch_file_is_named(self, trained_run, toy_dataset,
                                         tmp_path):
        result, _ = trained_run
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(json.dumps({
            "patch_id": "toy_scene_777_777", "source_image": "scene.png",
            "x": 777, "y": 777, "w": 64, "h": 64, "label": False,
            "mask_area_px": 0, "split": "test", "origin": "toy",
        }) + "\n", encoding="utf-8")
        with pytest.raises(TrainkitError, match="toy_scene_777_777.png"):
            export_scores(result.checkpoint, manifest, tmp_path / "s.jsonl")


class TestWindowGrid:
    def test_stride_steps(self):
        assert window_positions(128, 64, 64, False) == [0, 64]
        assert window_positions(150, 64, 64, False) == [0, 64]
        assert window_positions(150, 64, 64, True) == [0, 64, 86]
        assert window_positions(63, 64, 64, False) == []

    def test_exact_fit_gets_no_duplicate_anchor(self):
        assert window_positions(128, 64, 64, True) == [0, 64]


class TestCamExport:
    def test_grid_order_and_naming(self, cam_dir, scene_image):
        out_dir, written = cam_dir
        stem = scene_image.stem
        assert [p.name for p in written] == [
            f"{stem}_0_0.camt", f"{stem}_64_0.camt",
            f"{stem}_0_64.camt", f"{stem}_64_64.camt"]
        sidecar = json.loads((out_dir / "windows.json").read_text())
        assert [w["file"] for w in sidecar["windows"]] == [p.name for p in written]
        assert all(0.0 <= w["score"] <= 1.0 for w in sidecar["windows"])

    def test_tensor_layout(self, cam_dir):
        _, written = cam_dir
        header, acts, grads = parse_camt(written[1])
        assert header["order"] == "activations_then_gradients"
        assert header["k"] == 1280
        assert (header["hc"], header["wc"]) == (2, 2)
        assert header["window"] == [64, 0, PATCH, PATCH]
        assert np.isfinite(acts).all() and np.isfinite(grads).all()
        assert (acts != 0).any()
        assert (grads != 0).any()

    def test_reexport_is_byte_identical(self, cam_dir, trained_run,
                                        scene_image, tmp_path):
        _, written = cam_dir
        result, _ = trained_run
        again = export_cams(result.checkpoint, scene_image, tmp_path,
                            patch_size=PATCH, stride=PATCH)
        assert again[0].read_bytes() == written[0].read_bytes()

    def test_zero_head_gives_zero_gradients(self, trained_run, scene_image,
                                            tmp_path):
        result, _ = trained_run
        model, _ = load_checkpoint(result.checkpoint)
        with torch.no_grad():
            model.classifier[1].weight.zero_()
            model.classifier[1].bias.zero_()
        ckpt = tmp_path / "zero_head.pt"
        save_checkpoint(ckpt, model)
        written = export_cams(ckpt, scene_image, tmp_path / "cams",
                              patch_size=PATCH, stride=PATCH)
        for path in written:
            _, acts, grads = parse_camt(path)
            assert (grads == 0).all()
            assert (acts != 0).any()

    def test_image_smaller_than_window_rejected(self, trained_run, tmp_path):
        from PIL import Image
        result, _ = trained_run
        small = tmp_path / "small.png"
        Image.new("RGB", (32, 32)).save(small)
        with pytest.raises(TrainkitError, match="smaller than one"):
            export_cams(result.checkpoint, small, tmp_path / "cams",
                        patch_size=PATCH, stride=PATCH)


class TestCrossComponentInterop:
    """The .camt files must satisfy the evaluation toolkit's parser.

    Package code never imports that toolkit; this test does, and only
    to prove the export really is interchangeable.
    """

    def test_reference_reader_accepts_export(self, cam_dir):
        tileinfer = pytest.importorskip("hickit.tileinfer")
        _, written = cam_dir
        tensors = tileinfer.read_camt(written[0])
        assert tensors.activations.shape == (1280, 2, 2)
        heat = tensors.heatmap()
        assert heat.shape == (PATCH, PATCH)
        assert np.isfinite(heat).all()

    def test_rewrite_through_reference_writer_is_byte_identical(self, cam_dir,
                                                                tmp_path):
        tileinfer = pytest.importorskip("hickit.tileinfer")
        _, written = cam_dir
        tensors = tileinfer.read_camt(written[0])
        echo = tmp_path / "echo.camt"
        tileinfer.write_camt(echo, tensors)
        assert echo.read_bytes() == written[0].read_bytes()

    def test_reference_score_loader_accepts_export(self, score_file):
        clsmetrics = pytest.importorskip("hickit.clsmetrics")
        out, count = score_file
        scores = clsmetrics.load_scores(out)
        assert len(scores) == count
        assert all(0.0 <= v <= 1.0 for v in scores.values())
