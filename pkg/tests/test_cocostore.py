"""Dataset store tests: load/save, validation, results, splits, merges."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset, rect_ring, write_coco
from hickit.cocostore import (
    CocoDataset,
    SplitSpec,
    load_dataset,
    load_results,
    merge_datasets,
    save_dataset,
    split_dataset,
)
from hickit.errors import DatasetError


class TestLoadValidate:
    def test_fixture_counts(self, tmp_path, two_image_dataset):
        path = tmp_path / "gt.json"
        write_coco(path, two_image_dataset)
        ds = load_dataset(path)
        assert len(ds.images) == 2
        assert len(ds.annotations) == 3
        assert ds.category_id_by_name("honeycomb") == 1

    def test_empty_annotations_is_valid(self, tmp_path):
        ds = make_dataset(images=[(1, 64, 64, "a.png")], annotations=[])
        path = tmp_path / "gt.json"
        write_coco(path, ds)
        assert load_dataset(path).annotations == []

    def test_dangling_image_reference_rejected(self, tmp_path):
        ds = make_dataset(images=[(1, 64, 64, "a.png")], annotations=[])
        ds.annotations.append(
            {"id": 7, "image_id": 99, "category_id": 1, "bbox": [0, 0, 8, 8], "area": 64,
             "iscrowd": 0, "segmentation": [rect_ring(0, 0, 8, 8)]}
        )
        path = tmp_path / "gt.json"
        write_coco(path, ds)
        with pytest.raises(DatasetError, match="7"):
            load_dataset(path)

    def test_duplicate_image_ids_rejected(self):
        ds = CocoDataset(
            images=[{"id": 1, "width": 8, "height": 8, "file_name": "a"},
                    {"id": 1, "width": 8, "height": 8, "file_name": "b"}],
        )
        with pytest.raises(DatasetError, match="duplicate image ids"):
            ds.validate()

    def test_out_of_bounds_bbox_rejected(self):
        ds = make_dataset(images=[(1, 64, 64, "a.png")], annotations=[])
        ds.annotations.append(
            {"id": 3, "image_id": 1, "category_id": 1, "bbox": [60, 0, 10, 10], "area": 100,
             "iscrowd": 0, "segmentation": [rect_ring(60, 0, 4, 10)]}
        )
        with pytest.raises(DatasetError, match=r"\[3\]"):
            ds.validate()

    def test_invalid_json_reports_position(self, tmp_path):
        path = tmp_path / "gt.json"
        path.write_text('{"images": [', encoding="utf-8")
        with pytest.raises(DatasetError, match="line"):
            load_dataset(path)

    def test_save_load_roundtrip_is_byte_identical(self, tmp_path, two_image_dataset):
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_dataset(two_image_dataset, first)
        save_dataset(load_dataset(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_unknown_fields_survive_roundtrip(self, tmp_path, two_image_dataset):
        two_image_dataset.extra["info"] = {"year": 2021}
        two_image_dataset.images[0]["license"] = 4
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_dataset(two_image_dataset, first)
        reloaded = load_dataset(first)
        assert reloaded.extra["info"] == {"year": 2021}
        save_dataset(reloaded, second)
        assert first.read_bytes() == second.read_bytes()


class TestLoadResults:
    def test_single_row(self, tmp_path, two_image_dataset):
        path = tmp_path / "res.json"
        path.write_text(json.dumps(
            [{"image_id": 1, "category_id": 1, "bbox": [4, 4, 20, 20], "score": 0.9}]
        ))
        dets = load_results(path, two_image_dataset)
        assert list(dets) == [1]
        assert dets[1][0].score == 0.9
        assert dets[1][0].bbox.to_list() == [4.0, 4.0, 20.0, 20.0]

    def test_empty_array(self, tmp_path, two_image_dataset):
        path = tmp_path / "res.json"
        path.write_text("[]")
        assert load_results(path, two_image_dataset) == {}

    def test_score_above_one_rejected(self, tmp_path, two_image_dataset):
        path = tmp_path / "res.json"
        path.write_text(json.dumps(
            [{"image_id": 1, "category_id": 1, "bbox": [0, 0, 5, 5], "score": 1.3}]
        ))
        with pytest.raises(DatasetError, match="1.3"):
            load_results(path, two_image_dataset)

    def test_unknown_image_rejected(self, tmp_path, two_image_dataset):
        path = tmp_path / "res.json"
        path.write_text(json.dumps(
            [{"image_id": 42, "category_id": 1, "bbox": [0, 0, 5, 5], "score": 0.5}]
        ))
        with pytest.raises(DatasetError, match="42"):
            load_results(path, two_image_dataset)

    def test_rle_segmentation_resolves_against_image_size(self, tmp_path, two_image_dataset):
        path = tmp_path / "res.json"
        path.write_text(json.dumps([
            {"image_id": 2, "category_id": 1, "bbox": [0, 0, 5, 5], "score": 0.5,
             "segmentation": {"counts": [0, 300 * 260], "size": [260, 300]}}
        ]))
        dets = load_results(path, two_image_dataset)
        assert dets[2][0].segmentation.to_grid().all()


def _dataset_with_n_images(n):
    return make_dataset(
        images=[(i, 64, 64, f"im{i:03d}.png") for i in range(1, n + 1)],
        annotations=[],
    )


class TestSplit:
    def test_ten_images_splits_6_2_2(self):
        parts = split_dataset(_dataset_with_n_images(10), SplitSpec(val=0.2, test=0.2, seed=7))
        sizes = {k: len(v.images) for k, v in parts.items()}
        assert sizes == {"train": 6, "val": 2, "test": 2}
        ids = [im["id"] for part in parts.values() for im in part.images]
        assert sorted(ids) == list(range(1, 11))

    def test_single_image_goes_to_train(self):
        parts = split_dataset(_dataset_with_n_images(1), SplitSpec(val=0.2, test=0.2, seed=0))
        assert len(parts["train"].images) == 1
        assert len(parts["val"].images) == 0
        assert len(parts["test"].images) == 0

    def test_same_seed_reproduces_partition(self):
        ds = _dataset_with_n_images(30)
        a = split_dataset(ds, SplitSpec(seed=11))
        b = split_dataset(ds, SplitSpec(seed=11))
        for name in ("train", "val", "test"):
            assert [im["id"] for im in a[name].images] == [im["id"] for im in b[name].images]

    def test_different_seeds_usually_differ(self):
        ds = _dataset_with_n_images(30)
        a = split_dataset(ds, SplitSpec(seed=1))
        b = split_dataset(ds, SplitSpec(seed=2))
        assert {im["id"] for im in a["train"].images} != {im["id"] for im in b["train"].images}

    def test_annotations_follow_their_image(self, two_image_dataset):
        parts = split_dataset(two_image_dataset, SplitSpec(val=0.5, test=0.0, seed=3))
        for part in parts.values():
            ids = {im["id"] for im in part.images}
            assert all(a["image_id"] in ids for a in part.annotations)

    @settings(max_examples=60)
    @given(st.integers(0, 40), st.integers(0, 2**32))
    def test_partition_covers_every_image_exactly_once(self, n, seed):
        parts = split_dataset(_dataset_with_n_images(n), SplitSpec(seed=seed))
        ids = [im["id"] for part in parts.values() for im in part.images]
        assert sorted(ids) == list(range(1, n + 1))
        # Round-half-up sizing with the remainder to train.
        assert len(parts["val"].images) == int(0.2 * n + 0.5)
        assert len(parts["test"].images) == int(0.2 * n + 0.5)

    def test_bad_fractions_rejected(self):
        with pytest.raises(DatasetError):
            SplitSpec(val=0.7, test=0.4)


class TestMerge:
    def test_two_plus_three_images(self):
        merged = merge_datasets(
            _dataset_with_n_images(2), _dataset_with_n_images(3), "web", "metis"
        )
        assert len(merged.images) == 5
        ids = [im["id"] for im in merged.images]
        assert len(set(ids)) == 5
        assert [im["origin"] for im in merged.images] == ["web", "web", "metis", "metis", "metis"]

    def test_merge_with_empty_keeps_content(self, two_image_dataset):
        merged = merge_datasets(two_image_dataset, CocoDataset(), origin_a="w")
        assert len(merged.images) == 2
        assert len(merged.annotations) == 3
        by_name = {im["file_name"]: im for im in merged.images}
        assert set(by_name) == {"slab_a.png", "slab_b.png"}
        assert all(im["origin"] == "w" for im in merged.images)

    def test_self_merge_doubles_without_collisions(self, two_image_dataset):
        merged = merge_datasets(two_image_dataset, two_image_dataset)
        assert len(merged.images) == 4
        assert len({im["id"] for im in merged.images}) == 4
        assert len({a["id"] for a in merged.annotations}) == 6
        merged.validate()

    def test_categories_unify_by_name(self, two_image_dataset):
        other = make_dataset(images=[(9, 32, 32, "x.png")], annotations=[])
        merged = merge_datasets(two_image_dataset, other)
        assert [c["name"] for c in merged.categories] == ["honeycomb"]

    def test_existing_origin_preserved(self, two_image_dataset):
        two_image_dataset.images[0]["origin"] = "prior"
        merged = merge_datasets(two_image_dataset, CocoDataset(), origin_a="new")
        assert merged.images[0]["origin"] == "prior"
        assert merged.images[1]["origin"] == "new"
