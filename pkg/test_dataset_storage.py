"""
Tests for dataset persistence, validation on load, and crop batching.
"""
import json

import numpy as np
import pytest
import torch

from openset_panoseg.data import CropBatcher, generate_split, load_dataset, write_dataset
from openset_panoseg.data.storage import MemoryStorage, PngStorage, create_storage
from openset_panoseg.exceptions import DatasetError, InvalidInputError
from openset_panoseg.models import source_spec, target_spec


def test_png_round_trip_is_bit_exact(tmp_path):
    written = write_dataset(str(tmp_path), "source_train", source_spec(), 5, size=(32, 64), seed=3)
    loaded = load_dataset(str(tmp_path), "source_train", spec=source_spec())
    assert len(loaded) == 5
    assert np.array_equal(loaded.images, written.images)
    assert np.array_equal(loaded.labels, written.labels)
    assert loaded.meta.class_names == source_spec().class_names


def test_layout_on_disk(tmp_path):
    write_dataset(str(tmp_path), "target_val", target_spec(), 2, size=(32, 64), seed=0)
    split = tmp_path / "target_val"
    assert sorted(p.name for p in (split / "images").iterdir()) == ["00000.png", "00001.png"]
    assert sorted(p.name for p in (split / "labels").iterdir()) == ["00000.png", "00001.png"]
    meta = json.loads((split / "meta.json").read_text())
    assert meta["num_base"] == 5 and meta["unknown_id"] == 5
    assert meta["spec"]["domain"] == "target"


def test_memory_storage_round_trip(memory_storage):
    written = write_dataset(memory_storage, "source_train", source_spec(), 3, size=(32, 64), seed=1)
    loaded = load_dataset(memory_storage, "source_train")
    assert np.array_equal(loaded.images, written.images)
    assert np.array_equal(loaded.labels, written.labels)


def test_rewriting_a_split_with_fewer_samples_drops_old_files(tmp_path):
    write_dataset(str(tmp_path), "source_train", source_spec(), 4, size=(32, 64), seed=0)
    rewritten = write_dataset(str(tmp_path), "source_train", source_spec(), 2, size=(32, 64), seed=1)
    assert sorted(p.name for p in (tmp_path / "source_train" / "labels").iterdir()) == ["00000.png", "00001.png"]
    loaded = load_dataset(str(tmp_path), "source_train")
    assert len(loaded) == 2
    assert np.array_equal(loaded.images, rewritten.images)


def test_memory_split_rewrite_keeps_only_new_samples(memory_storage):
    write_dataset(memory_storage, "target_val", target_spec(), 4, size=(32, 64))
    write_dataset(memory_storage, "target_val", target_spec(), 2, size=(32, 64))
    assert memory_storage.list_samples("target_val") == [0, 1]
    assert len(load_dataset(memory_storage, "target_val")) == 2


def test_generation_independent_of_worker_count():
    one = generate_split(target_spec(), 4, size=(32, 64), seed=9, workers=1)
    many = generate_split(target_spec(), 4, size=(32, 64), seed=9, workers=3)
    assert np.array_equal(one[0], many[0])
    assert np.array_equal(one[1], many[1])


def test_tampered_meta_rejected(tmp_path):
    write_dataset(str(tmp_path), "source_train", source_spec(), 2, size=(32, 64))
    path = tmp_path / "source_train" / "meta.json"
    meta = json.loads(path.read_text())
    meta["num_base"] = 7
    path.write_text(json.dumps(meta))
    with pytest.raises(DatasetError, match="meta.json"):
        load_dataset(str(tmp_path), "source_train")


def test_meta_class_count_mismatch_with_spec_rejected(memory_storage):
    write_dataset(memory_storage, "source_train", source_spec(), 1, size=(32, 64))
    spec = source_spec()
    spec = spec.model_copy(update={"palette": spec.palette[:4] + spec.palette[5:]})
    with pytest.raises(DatasetError, match="base classes"):
        load_dataset(memory_storage, "source_train", spec=spec)


def test_domain_mismatch_rejected(memory_storage):
    write_dataset(memory_storage, "target_train", target_spec(), 1, size=(32, 64))
    with pytest.raises(DatasetError, match="expected source"):
        load_dataset(memory_storage, "target_train", spec=source_spec())


def test_invalid_label_id_rejected_with_offending_id(tmp_path):
    written = write_dataset(str(tmp_path), "source_train", source_spec(), 2, size=(32, 64))
    storage = PngStorage(str(tmp_path))
    label = written.labels[1].copy()
    label[0, 0] = 5 + 3
    storage.write_sample("source_train", 1, written.images[1], label)
    with pytest.raises(DatasetError, match=r"\[8\]") as info:
        load_dataset(str(tmp_path), "source_train")
    assert "00001.png" in str(info.value)


def test_unknown_id_rejected_in_source_split(memory_storage):
    written = write_dataset(memory_storage, "source_train", source_spec(), 1, size=(32, 64))
    label = written.labels[0].copy()
    label[:2, :2] = 5
    memory_storage.write_sample("source_train", 0, written.images[0], label)
    with pytest.raises(DatasetError, match=r"\[5\]"):
        load_dataset(memory_storage, "source_train")


def test_missing_label_file_names_path(tmp_path):
    write_dataset(str(tmp_path), "target_val", target_spec(), 2, size=(32, 64))
    missing = tmp_path / "target_val" / "labels" / "00001.png"
    missing.unlink()
    with pytest.raises(DatasetError, match="00001.png"):
        load_dataset(str(tmp_path), "target_val")


def test_corrupt_image_file_rejected(tmp_path):
    write_dataset(str(tmp_path), "target_val", target_spec(), 1, size=(32, 64))
    (tmp_path / "target_val" / "images" / "00000.png").write_bytes(b"not a png")
    with pytest.raises(DatasetError, match="Corrupt"):
        load_dataset(str(tmp_path), "target_val")


def test_missing_sample_gap_rejected(tmp_path):
    write_dataset(str(tmp_path), "target_val", target_spec(), 3, size=(32, 64))
    (tmp_path / "target_val" / "images" / "00001.png").unlink()
    with pytest.raises(DatasetError, match="first missing"):
        load_dataset(str(tmp_path), "target_val")


def test_missing_meta_rejected(tmp_path):
    with pytest.raises(DatasetError, match="meta.json"):
        load_dataset(str(tmp_path), "source_train")


def test_count_limits_loaded_samples(memory_storage):
    write_dataset(memory_storage, "source_train", source_spec(), 4, size=(32, 64))
    assert len(load_dataset(memory_storage, "source_train", count=2)) == 2
    with pytest.raises(DatasetError):
        load_dataset(memory_storage, "source_train", count=5)


def test_unsafe_split_name_rejected(tmp_path):
    with pytest.raises(InvalidInputError):
        load_dataset(str(tmp_path), "../escape")


def test_create_storage_factory(tmp_path):
    assert isinstance(create_storage("memory"), MemoryStorage)
    assert isinstance(create_storage("png", root=str(tmp_path)), PngStorage)
    with pytest.raises(ValueError):
        create_storage("png")
    with pytest.raises(ValueError):
        create_storage("zip")


def test_class_pixel_counts_cover_every_labeled_pixel(memory_storage):
    dataset = write_dataset(memory_storage, "source_train", source_spec(), 3, size=(32, 64))
    counts = dataset.class_pixel_counts()
    assert counts.shape == (3, 5)
    assert (counts.sum(axis=1) == (dataset.labels < 5).reshape(3, -1).sum(axis=1)).all()


def test_items_are_dequantized_float_and_long(memory_storage):
    dataset = write_dataset(memory_storage, "target_train", target_spec(), 1, size=(32, 64))
    image, label = dataset[0]
    assert image.dtype == np.float32 and 0.0 <= image.min() and image.max() <= 1.0
    assert label.dtype == np.int64


def test_crop_batcher_is_reproducible(memory_storage):
    dataset = write_dataset(memory_storage, "source_train", source_spec(), 4, size=(32, 64))
    first = CropBatcher(dataset, (32, 32), 3, torch.Generator().manual_seed(0), flip=True).next_batch()
    second = CropBatcher(dataset, (32, 32), 3, torch.Generator().manual_seed(0), flip=True).next_batch()
    assert first[0].shape == (3, 3, 32, 32) and first[1].shape == (3, 32, 32)
    assert first[1].dtype == torch.long
    assert torch.equal(first[0], second[0]) and torch.equal(first[1], second[1])


def test_crop_batcher_weights_select_images(memory_storage):
    dataset = write_dataset(memory_storage, "source_train", source_spec(), 3, size=(32, 64))
    weights = np.array([0.0, 1.0, 0.0])
    images, labels = CropBatcher(dataset, (32, 64), 4, torch.Generator().manual_seed(1), weights).next_batch()
    expected = torch.from_numpy(dataset.labels[1].astype(np.int64))
    for label in labels:
        assert torch.equal(label, expected)


def test_crop_batcher_rejects_oversized_crop(memory_storage):
    dataset = write_dataset(memory_storage, "source_train", source_spec(), 1, size=(32, 64))
    with pytest.raises(InvalidInputError):
        CropBatcher(dataset, (48, 32), 1, torch.Generator())
