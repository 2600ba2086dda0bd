import json

import numpy as np
import pytest

from faceinpaint.augmentation import (
    augment_epoch,
    augment_pair,
    augmentation_ablation,
    identity_augmenter,
    make_augmenter,
    write_augmented_dataset,
)
from faceinpaint.config import desk_profile
from faceinpaint.data import load_face_dataset, synthetic_face_dataset
from faceinpaint.generator import GeneratorConfig, build_generator
from faceinpaint.imaging import Mask, generate_block_mask, generate_center_mask

DATASET = synthetic_face_dataset(6, 64, seed=3)
NET = build_generator(GeneratorConfig(input_size=64).scaled(4), rng_seed=9)


def test_augment_pair_preserves_labels_exactly():
    sample = DATASET[0]
    mask = generate_center_mask(64, 64)
    aug_image, aug_lm = augment_pair(NET, sample.image, sample.landmarks, mask)
    assert aug_lm is sample.landmarks
    np.testing.assert_array_equal(aug_lm.points, sample.landmarks.points)


def test_augment_pair_preserves_unmasked_pixels_exactly():
    sample = DATASET[1]
    mask = generate_block_mask(64, 64, rng_seed=4, target_coverage=0.3)
    aug_image, _ = augment_pair(NET, sample.image, sample.landmarks, mask)
    outside = mask.pixels == 0
    np.testing.assert_array_equal(
        aug_image.pixels[outside], sample.image.pixels[outside]
    )


def test_augment_pair_valid_for_extreme_masks():
    sample = DATASET[2]
    for mask_px in (np.zeros((64, 64), np.uint8), np.ones((64, 64), np.uint8)):
        aug_image, _ = augment_pair(NET, sample.image, sample.landmarks, Mask(mask_px))
        assert np.isfinite(aug_image.pixels).all()
        assert aug_image.pixels.min() >= -1 and aug_image.pixels.max() <= 1
    zero_aug, _ = augment_pair(
        NET, sample.image, sample.landmarks, Mask(np.zeros((64, 64), np.uint8))
    )
    np.testing.assert_array_equal(zero_aug.pixels, sample.image.pixels)


def test_different_masks_change_hole_content():
    sample = DATASET[3]
    mask_a = generate_block_mask(64, 64, rng_seed=5, target_coverage=0.3)
    mask_b = generate_block_mask(64, 64, rng_seed=6, target_coverage=0.3)
    aug_a, _ = augment_pair(NET, sample.image, sample.landmarks, mask_a)
    aug_b, _ = augment_pair(NET, sample.image, sample.landmarks, mask_b)
    both_holes = (mask_a.pixels == 1) & (mask_b.pixels == 1)
    assert both_holes.any()
    assert not np.array_equal(aug_a.pixels[both_holes], aug_b.pixels[both_holes])


def test_augment_epoch_doubles_and_interleaves():
    view = augment_epoch(DATASET, NET, epoch_seed=[1, 0])
    assert len(view) == 2 * len(DATASET)
    for i, sample in enumerate(DATASET):
        assert view[2 * i] is sample
        np.testing.assert_array_equal(
            view[2 * i + 1].landmarks.points, sample.landmarks.points
        )


def test_augment_epoch_seeded_and_epoch_varying():
    a1 = augment_epoch(DATASET, NET, epoch_seed=[1, 0])
    a2 = augment_epoch(DATASET, NET, epoch_seed=[1, 0])
    b = augment_epoch(DATASET, NET, epoch_seed=[1, 1])
    np.testing.assert_array_equal(a1[1].image.pixels, a2[1].image.pixels)
    assert not np.array_equal(a1[1].image.pixels, b[1].image.pixels)


def test_identity_augmenter_control_gives_equal_nme():
    cfg = desk_profile(max_steps=3, batch_landmark=4, seed=5)
    report = augmentation_ablation(None, DATASET, cfg, identity_augmenter)
    assert report.nme_base == report.nme_aug
    assert len(report.config_fingerprint) == 16
    assert set(report.as_dict()) == {"nme_base", "nme_aug", "config_fingerprint"}


def test_real_augmenter_changes_training_data():
    cfg = desk_profile(max_steps=2, batch_landmark=4, seed=5)
    report = augmentation_ablation(None, DATASET, cfg, make_augmenter(NET))
    # An untrained inpaintor yields different (not necessarily better) NME.
    assert report.nme_base != report.nme_aug


def test_write_augmented_dataset_mirrors_with_manifest(tmp_path):
    manifest_path = write_augmented_dataset(DATASET, NET, tmp_path / "aug", seed=2)
    manifest = json.loads(manifest_path.read_text())
    assert len(manifest["samples"]) == len(DATASET)
    reloaded = load_face_dataset(tmp_path / "aug")
    assert len(reloaded) == len(DATASET)
    for entry in manifest["samples"]:
        assert (tmp_path / "aug" / entry["image"]).exists()
        assert (tmp_path / "aug" / entry["landmarks"]).exists()
