"""
Tests for the synthetic two-domain scene generator and its geometric transforms.
"""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from openset_panoseg.data import generate_scene, inverse_panoramic_warp, panoramic_warp, random_crop
from openset_panoseg.data.synthetic import class_ids
from openset_panoseg.data.transforms import column_displacement, crop_offset, hflip
from openset_panoseg.exceptions import InvalidInputError
from openset_panoseg.models import IGNORE_ID, DomainSpec, source_spec, target_spec


def test_scene_is_deterministic():
    first = generate_scene(0, source_spec(), (64, 128))
    second = generate_scene(0, source_spec(), (64, 128))
    assert np.array_equal(first[0], second[0])
    assert np.array_equal(first[1], second[1])


def test_scene_shapes_and_ranges():
    image, label = generate_scene(3, target_spec(), (64, 128))
    assert image.shape == (64, 128, 3) and image.dtype == np.float32
    assert label.shape == (64, 128) and label.dtype == np.uint8
    assert image.min() >= 0.0 and image.max() <= 1.0


@given(st.integers(min_value=0, max_value=10_000))
def test_source_scenes_never_contain_unknown(seed):
    spec = source_spec()
    _, label = generate_scene(seed, spec, (32, 64))
    allowed = set(range(spec.num_base)) | {IGNORE_ID}
    assert set(np.unique(label).tolist()) <= allowed
    assert spec.unknown_id not in label


def test_target_scene_contains_private_class():
    spec = target_spec()
    _, label = generate_scene(7, spec, (64, 128))
    assert (label == spec.unknown_id).any()


def test_private_classes_map_to_unknown_id():
    spec = target_spec()
    ids = class_ids(spec)
    assert ids["obstacle"] == spec.unknown_id == spec.num_base == 5
    assert spec.class_names[-1] == "unknown"


@pytest.mark.parametrize("size", [(63, 128), (64, 127), (16, 64), (64, 30)])
def test_invalid_scene_size_rejected(size):
    with pytest.raises(InvalidInputError):
        generate_scene(0, source_spec(), size)


def test_source_domain_cannot_enable_private():
    with pytest.raises(ValueError):
        DomainSpec(domain="source", private_enabled=True)


def test_zero_warp_is_identity():
    image, label = generate_scene(1, source_spec(), (32, 64))
    warped_image, warped_label = panoramic_warp(image, label, 0.0)
    assert np.array_equal(warped_image, image)
    assert np.array_equal(warped_label, label)


def test_warp_then_inverse_restores_labels_outside_boundary_band():
    _, label = generate_scene(2, source_spec(), (64, 128))
    image = np.zeros((64, 128, 3), dtype=np.float32)
    _, forward = panoramic_warp(image, label, 0.1)
    _, back = inverse_panoramic_warp(image, forward, 0.1)

    height = label.shape[0]
    rows, cols = np.nonzero(back != label)
    for y, x in zip(rows, cols):
        neighbours = {label[(y - 1) % height, x], label[(y + 1) % height, x]}
        assert neighbours != {label[y, x]}, f"mismatch at ({y}, {x}) away from a class boundary"


def test_warp_is_periodic_across_the_seam():
    shifts = column_displacement(np.array([0, 128]), 64, 128, 0.2)
    assert shifts[0] == pytest.approx(shifts[1], abs=1e-9)


@pytest.mark.parametrize("amplitude", [-0.01, 0.26, float("nan")])
def test_warp_amplitude_out_of_range_rejected(amplitude):
    image, label = generate_scene(0, source_spec(), (32, 64))
    with pytest.raises(InvalidInputError):
        panoramic_warp(image, label, amplitude)


def test_full_size_crop_is_identity():
    image, label = generate_scene(0, source_spec(), (32, 64))
    cropped_image, cropped_label = random_crop(image, label, (32, 64), seed=11)
    assert np.array_equal(cropped_image, image)
    assert np.array_equal(cropped_label, label)


def test_crop_same_seed_same_window():
    image, label = generate_scene(0, source_spec(), (64, 128))
    a = random_crop(image, label, (32, 32), seed=5)
    b = random_crop(image, label, (32, 32), seed=5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_crop_larger_than_image_rejected():
    image, label = generate_scene(0, source_spec(), (32, 64))
    with pytest.raises(InvalidInputError):
        random_crop(image, label, (48, 32), seed=0)


def test_crop_offsets_are_uniform():
    draws = np.array([crop_offset((64, 128), (32, 32), seed) for seed in range(10_000)])
    for axis, bins in ((0, 33), (1, 97)):
        counts = np.bincount(draws[:, axis], minlength=bins)
        assert counts.shape == (bins,)
        expected = len(draws) / bins
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        dof = bins - 1
        assert chi2 < dof + 5 * np.sqrt(2 * dof)


def test_hflip_keeps_pixel_alignment():
    image, label = generate_scene(4, source_spec(), (32, 64))
    flipped_image, flipped_label = hflip(image, label)
    assert np.array_equal(flipped_label[:, 0], label[:, -1])
    assert np.array_equal(flipped_image[:, 0], image[:, -1])


@pytest.mark.parametrize("bad", [float("nan"), 1.5, -0.2])
def test_warp_and_crop_reject_images_outside_unit_range(bad):
    image, label = generate_scene(0, source_spec(), (32, 64))
    image = image.copy()
    image[3, 5, 1] = bad
    with pytest.raises(InvalidInputError, match="within \\[0, 1\\]"):
        panoramic_warp(image, label, 0.1)
    with pytest.raises(InvalidInputError, match="within \\[0, 1\\]"):
        random_crop(image, label, (32, 32), seed=0)


@pytest.mark.parametrize("amplitude", [0.05, 0.15, 0.25])
@pytest.mark.parametrize("seed", [0, 7, 21])
def test_warp_conserves_class_pixel_counts(seed, amplitude):
    image, label = generate_scene(seed, target_spec(), (64, 128))
    _, warped = panoramic_warp(image, label, amplitude)
    before = np.bincount(label.reshape(-1), minlength=256)
    after = np.bincount(warped.reshape(-1), minlength=256)
    present = before > 0
    assert np.all(np.abs(after[present] - before[present]) < 0.02 * before[present])
    assert np.all(after[~present] == 0)
