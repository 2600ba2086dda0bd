"""Landmark-conditioned data augmentation.

A trained inpaintor turns (image, mask) into a new plausible face that still
matches the original ground-truth landmarks, so the pair (augmented image,
original landmarks) is free extra training data for landmark predictors.
The masked region changes per epoch, so each epoch sees fresh variants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from torch import nn

from .checkpoint import Checkpoint
from .data import FaceDataset, Sample
from .generator import InpaintGenerator, forward_generator
from .imaging import (
    Image,
    LandmarkSet,
    Mask,
    apply_mask,
    composite,
    generate_block_mask,
    render_landmark_map,
    save_image,
    save_landmarks,
)

Augmenter = Callable[[Image, LandmarkSet, Mask], tuple[Image, LandmarkSet]]


def augment_pair(
    inpaint_net: InpaintGenerator, image: Image, gt: LandmarkSet, mask: Mask
) -> tuple[Image, LandmarkSet]:
    """Corrupt, inpaint conditioned on the ground-truth landmarks, composite.

    The landmark labels are returned unchanged: the generator was trained to
    realize whatever the landmark map dictates, so the labels stay valid.
    """
    corrupted = apply_mask(image, mask)
    lmap = render_landmark_map(gt, image.height, image.width)
    raw = forward_generator(inpaint_net, corrupted, lmap)
    completed = composite(raw, image, mask)
    return Image(completed.pixels, source_id=image.source_id), gt


def make_augmenter(inpaint_net: InpaintGenerator) -> Augmenter:
    return lambda image, gt, mask: augment_pair(inpaint_net, image, gt, mask)


def identity_augmenter(image: Image, gt: LandmarkSet, mask: Mask):
    """Control augmenter: returns the pair untouched."""
    return image, gt


def _epoch_mask(size: int, entropy, index: int) -> Mask:
    rng = np.random.default_rng([*entropy, index])
    coverage = float(rng.uniform(0.1, 0.5))
    return generate_block_mask(
        size, size, rng_seed=int(rng.integers(2**31)), target_coverage=coverage
    )


def augment_epoch(
    dataset: Sequence[Sample],
    augmenter: InpaintGenerator | Augmenter,
    epoch_seed,
) -> list[Sample]:
    """One epoch view: originals interleaved with augmented variants (2N).

    Deterministic in (dataset, epoch_seed); different epoch seeds give each
    sample a different mask and therefore a different augmented variant.
    """
    fn = make_augmenter(augmenter) if isinstance(augmenter, nn.Module) else augmenter
    entropy = list(np.atleast_1d(epoch_seed).astype(np.int64))
    view: list[Sample] = []
    for i, sample in enumerate(dataset):
        mask = _epoch_mask(sample.image.height, entropy, i)
        aug_image, aug_lm = fn(sample.image, sample.landmarks, mask)
        view.append(sample)
        view.append(Sample(aug_image, aug_lm))
    return view


def write_augmented_dataset(
    dataset: Sequence[Sample],
    inpaint_net: InpaintGenerator,
    out_root: str | Path,
    seed: int = 0,
) -> Path:
    """Write one augmented variant per sample as (PNG, JSON) pairs plus a
    manifest; returns the manifest path."""
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, sample in enumerate(dataset):
        mask = _epoch_mask(sample.image.height, [seed], i)
        aug_image, aug_lm = augment_pair(inpaint_net, sample.image, sample.landmarks, mask)
        stem = f"aug_{i:05d}"
        save_image(aug_image, out_root / f"{stem}.png")
        save_landmarks(aug_lm, out_root / f"{stem}.json")
        entries.append(
            {
                "image": f"{stem}.png",
                "landmarks": f"{stem}.json",
                "source": sample.image.source_id,
                "mask_coverage": float(mask.hole_fraction()),
            }
        )
    manifest = out_root / "manifest.json"
    manifest.write_text(json.dumps({"seed": seed, "samples": entries}, indent=2))
    return manifest


@dataclass(frozen=True)
class AblationReport:
    nme_base: float
    nme_aug: float
    config_fingerprint: str

    def as_dict(self) -> dict:
        return {
            "nme_base": self.nme_base,
            "nme_aug": self.nme_aug,
            "config_fingerprint": self.config_fingerprint,
        }


def _holdout_nme(ckpt: Checkpoint, holdout: FaceDataset) -> float:
    from .imaging import Mask as _Mask
    from .landmark_net import predict_landmarks
    from .metrics import nme
    from .training import load_landmark_net

    net = load_landmark_net(ckpt)
    size = holdout.image_size
    empty = _Mask(np.zeros((size, size), dtype=np.uint8))
    errors = []
    for sample in holdout:
        pred = predict_landmarks(net, apply_mask(sample.image, empty))
        errors.append(nme(pred, sample.landmarks))
    return float(np.mean(errors))


def augmentation_ablation(
    train_fn: Callable | None,
    dataset: FaceDataset,
    config,
    augmenter: Augmenter,
    holdout: int | None = None,
) -> AblationReport:
    """Train the landmark module twice with identical seeds, once with the
    identity augmenter (control arm) and once with `augmenter`, then compare
    holdout NME. Both arms run the same augmented-epoch code path, so an
    identity `augmenter` reproduces the control arm exactly.
    """
    from .training import train_landmark_module

    train_fn = train_fn or train_landmark_module
    holdout = holdout or max(1, len(dataset) // 4)
    train_ds, holdout_ds = dataset.split(holdout)
    ckpt_base = train_fn(train_ds, config, identity_augmenter)
    ckpt_aug = train_fn(train_ds, config, augmenter)
    return AblationReport(
        nme_base=_holdout_nme(ckpt_base, holdout_ds),
        nme_aug=_holdout_nme(ckpt_aug, holdout_ds),
        config_fingerprint=ckpt_base.fingerprint,
    )
