"""Decoupled training: the landmark module alone first, then the
generator/discriminator pair adversarially.

Every random draw (batch indices, training masks, augmentation) comes from
an rng keyed on (seed, step), never from sequential global state, so a run
resumed from a step-k checkpoint retraces the uninterrupted trajectory
exactly and two runs with one seed are identical.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .augmentation import augment_epoch
from .checkpoint import (
    Checkpoint,
    load_checkpoint,
    pack_module,
    pack_optimizer,
    save_checkpoint,
    unpack_module,
    unpack_optimizer,
)
from .config import TrainConfig
from .data import FaceDataset, Sample
from .discriminator import PatchDiscriminator, build_discriminator
from .features import IdentityExtractor, VggFeatureExtractor
from .generator import InpaintGenerator, build_generator
from .imaging import (
    Mask,
    generate_block_mask,
    generate_center_mask,
    load_irregular_mask,
    render_landmark_map,
)
from .landmark_net import LandmarkNet, build_landmark_net, landmark_loss, predict_landmarks
from .losses import (
    GeneratorLossComponents,
    NonFiniteLossError,
    adversarial_d_loss,
    adversarial_g_loss,
    perceptual_loss,
    pixel_loss,
    style_loss,
    total_generator_loss,
    tv_loss,
)

LOSS_LOG_COLUMNS = ("step", "l_pixel", "l_perc", "l_style", "l_tv", "l_advG", "l_advD")

Augmenter = Callable[..., tuple]


def resolve_extractor(config: TrainConfig):
    if config.feature_extractor == "identity":
        return IdentityExtractor()
    return VggFeatureExtractor()


def list_irregular_masks(mask_dir: str) -> list[Path]:
    paths = sorted(Path(mask_dir).glob("*.png"))
    if not paths:
        raise ValueError(f"mask_dir {mask_dir} holds no .png files")
    return paths


def sample_training_mask(
    size: int,
    rng: np.random.Generator,
    irregular_paths: Sequence[Path] | None,
    mask_mode: str = "random",
) -> Mask:
    """One training mask: fixed center, or a 50/50 mix of irregular-file and
    random block masks (all-block when no mask files are configured)."""
    if mask_mode == "center":
        return generate_center_mask(size, size)
    if irregular_paths and rng.uniform() < 0.5:
        path = irregular_paths[int(rng.integers(0, len(irregular_paths)))]
        return load_irregular_mask(path, size, size)
    coverage = float(rng.uniform(0.1, 0.55))
    return generate_block_mask(
        size, size, rng_seed=int(rng.integers(2**31)), target_coverage=coverage
    )


def _image_batch(pixels_list) -> torch.Tensor:
    return torch.from_numpy(np.stack(pixels_list)).permute(0, 3, 1, 2).contiguous()


def batch_indices(seed: int, step: int, pool_size: int, batch: int) -> np.ndarray:
    """Epoch-shuffle batch sampling, derived purely from (seed, step).

    Each epoch is one permutation of the pool walked in batch-size slices
    (wrapping into the permutation head so batches stay full), so every
    sample is visited once per epoch and a full-pool batch is exactly the
    whole pool.
    """
    steps_per_epoch = max(1, math.ceil(pool_size / batch))
    epoch, slot = divmod(step, steps_per_epoch)
    perm = np.random.default_rng([seed, 100, epoch]).permutation(pool_size)
    start = slot * batch
    picked = perm[start : start + batch]
    if len(picked) < batch:
        picked = np.concatenate([picked, perm[: batch - len(picked)]])
    return picked


def _write_loss_log(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


class LandmarkTrainer:
    """Minimizes the squared landmark regression error on freshly corrupted
    images; optionally over per-epoch augmented dataset views."""

    kind = "landmark"

    def __init__(
        self,
        dataset: FaceDataset,
        config: TrainConfig,
        augmenter: Augmenter | None = None,
    ):
        if dataset.image_size != config.image_size:
            raise ValueError(
                f"dataset images are {dataset.image_size}px, config wants "
                f"{config.image_size}px"
            )
        self.dataset = dataset
        self.config = config
        self.augmenter = augmenter
        self.net = build_landmark_net(config.landmark_net_config(), config.seed)
        self.optimizer = torch.optim.Adam(
            self.net.parameters(),
            lr=config.lr_landmark,
            betas=(config.beta1, config.beta2),
        )
        self.irregular_paths = (
            list_irregular_masks(config.mask_dir) if config.mask_dir else None
        )
        self.step_count = 0
        self.history: list[float] = []
        self._epoch_view: tuple[int, Sequence[Sample]] | None = None

    def _pool(self, step: int) -> Sequence[Sample]:
        if self.augmenter is None:
            return self.dataset
        steps_per_epoch = max(
            1, math.ceil(2 * len(self.dataset) / self.config.batch_landmark)
        )
        epoch = step // steps_per_epoch
        if self._epoch_view is None or self._epoch_view[0] != epoch:
            view = augment_epoch(
                self.dataset, self.augmenter, [self.config.seed, 31, epoch]
            )
            self._epoch_view = (epoch, view)
        return self._epoch_view[1]

    def step(self) -> float:
        cfg = self.config
        step = self.step_count
        pool = self._pool(step)
        indices = batch_indices(cfg.seed, step, len(pool), cfg.batch_landmark)
        corrupted, targets = [], []
        for k, idx in enumerate(indices):
            sample = pool[int(idx)]
            mask_rng = np.random.default_rng([cfg.seed, step, 1, k])
            mask = sample_training_mask(
                cfg.image_size, mask_rng, self.irregular_paths, cfg.mask_mode
            )
            keep = (1 - mask.pixels).astype(np.float32)[..., None]
            corrupted.append(sample.image.pixels * keep)
            targets.append(np.array(sample.landmarks.points))
        x = _image_batch(corrupted)
        y = torch.from_numpy(np.stack(targets))
        self.net.train()
        loss = landmark_loss(self.net(x), y)
        if not torch.isfinite(loss):
            raise NonFiniteLossError(f"landmark loss became {float(loss)} at step {step}")
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        self.step_count += 1
        value = float(loss.detach())
        self.history.append(value)
        return value

    def checkpoint(self) -> Checkpoint:
        arrays: dict = {}
        meta: dict = {}
        pack_module(arrays, "params/landmark_net", self.net)
        pack_optimizer(arrays, meta, "opt/landmark_net", self.optimizer)
        return Checkpoint(
            kind=self.kind,
            step=self.step_count,
            config=self.config.as_dict(),
            arrays=arrays,
            meta=meta,
        )

    @classmethod
    def from_checkpoint(
        cls,
        ckpt: Checkpoint,
        dataset: FaceDataset,
        augmenter: Augmenter | None = None,
    ) -> "LandmarkTrainer":
        ckpt.require_kind(cls.kind)
        trainer = cls(dataset, TrainConfig(**ckpt.config), augmenter)
        unpack_module(ckpt, "params/landmark_net", trainer.net)
        unpack_optimizer(ckpt, "opt/landmark_net", trainer.optimizer)
        trainer.step_count = ckpt.step
        return trainer


class InpaintTrainer:
    """Alternates one discriminator step and one generator step per
    iteration; the discriminator is always conditioned on the ground-truth
    landmark map."""

    kind = "inpaint"

    def __init__(
        self,
        dataset: FaceDataset,
        config: TrainConfig,
        landmark_source: str = "ground_truth",
        landmark_net: LandmarkNet | None = None,
    ):
        if landmark_source not in ("ground_truth", "predicted"):
            raise ValueError(f"unknown landmark source {landmark_source!r}")
        if landmark_source == "predicted" and landmark_net is None:
            raise ValueError("landmark_source='predicted' needs a landmark net")
        if dataset.image_size != config.image_size:
            raise ValueError(
                f"dataset images are {dataset.image_size}px, config wants "
                f"{config.image_size}px"
            )
        self.dataset = dataset
        self.config = config
        self.landmark_source = landmark_source
        self.landmark_net = landmark_net
        self.generator = build_generator(config.generator_config(), config.seed)
        self.discriminator = build_discriminator(
            config.discriminator_config(), config.seed + 1
        )
        self.extractor = resolve_extractor(config)
        self.weights = config.loss_weights()
        self.g_opt = torch.optim.Adam(
            self.generator.parameters(),
            lr=config.lr_generator,
            betas=(config.beta1, config.beta2),
        )
        self.d_opt = torch.optim.Adam(
            self.discriminator.parameters(),
            lr=config.lr_discriminator,
            betas=(config.beta1, config.beta2),
        )
        self.irregular_paths = (
            list_irregular_masks(config.mask_dir) if config.mask_dir else None
        )
        self.step_count = 0
        self.history: list[dict] = []
        self.step_events: list[str] = []

    def _batch(self, step: int):
        cfg = self.config
        indices = batch_indices(cfg.seed, step, len(self.dataset), cfg.batch_inpaint)
        images, masks, gen_maps, gt_maps = [], [], [], []
        size = cfg.image_size
        for k, idx in enumerate(indices):
            sample = self.dataset[int(idx)]
            mask_rng = np.random.default_rng([cfg.seed, step, 1, k])
            mask = sample_training_mask(size, mask_rng, self.irregular_paths, cfg.mask_mode)
            gt_map = render_landmark_map(sample.landmarks, size, size)
            if self.landmark_source == "predicted":
                from .imaging import apply_mask

                pred = predict_landmarks(self.landmark_net, apply_mask(sample.image, mask))
                gen_map = render_landmark_map(pred, size, size)
            else:
                gen_map = gt_map
            images.append(np.array(sample.image.pixels))
            masks.append(mask.pixels.astype(np.float32)[None])
            gen_maps.append(gen_map.pixels.astype(np.float32)[None])
            gt_maps.append(gt_map.pixels.astype(np.float32)[None])
        return (
            _image_batch(images),
            torch.from_numpy(np.stack(masks)),
            torch.from_numpy(np.stack(gen_maps)),
            torch.from_numpy(np.stack(gt_maps)),
        )

    def _conditioned(self, image_batch: torch.Tensor, map_batch: torch.Tensor):
        if self.config.use_landmark_channel:
            return torch.cat([image_batch, map_batch], dim=1)
        return image_batch

    def _discriminator_update(self, image, composited, gt_map) -> float:
        d_real = self.discriminator(self._conditioned(image, gt_map))
        d_fake = self.discriminator(self._conditioned(composited.detach(), gt_map))
        l_adv_d = adversarial_d_loss(d_fake, d_real)
        if not torch.isfinite(l_adv_d):
            raise NonFiniteLossError(
                f"discriminator loss became {float(l_adv_d.detach())}"
            )
        self.d_opt.zero_grad()
        l_adv_d.backward()
        self.d_opt.step()
        self.step_events.append("d_step")
        return float(l_adv_d.detach())

    def _generator_update(self, raw, composited, image, mask, gt_map) -> GeneratorLossComponents:
        d_fake_for_g = self.discriminator(self._conditioned(composited, gt_map))
        components = GeneratorLossComponents(
            pixel=pixel_loss(raw, image, mask),
            perceptual=perceptual_loss(raw, image, self.extractor),
            style=style_loss(raw, image, mask, self.extractor),
            tv=tv_loss(composited),
            adversarial=adversarial_g_loss(d_fake_for_g),
        )
        total = total_generator_loss(components, self.weights)
        self.g_opt.zero_grad()
        self.d_opt.zero_grad()  # discard discriminator grads from this pass
        total.backward()
        self.g_opt.step()
        self.step_events.append("g_step")
        return components

    def step(self) -> dict:
        step = self.step_count
        image, mask, gen_map, gt_map = self._batch(step)
        corrupted = image * (1 - mask)
        self.generator.train()
        self.discriminator.train()

        raw = self.generator(self._conditioned(corrupted, gen_map))
        composited = mask * raw + (1 - mask) * image

        # One discriminator step on the detached composite, then one
        # generator step on the full objective.
        l_adv_d = self._discriminator_update(image, composited, gt_map)
        components = self._generator_update(raw, composited, image, mask, gt_map)

        row = {"step": step, **components.as_dict(), "l_advD": l_adv_d}
        self.step_count += 1
        self.history.append(row)
        return row

    def checkpoint(self) -> Checkpoint:
        arrays: dict = {}
        meta: dict = {"landmark_source": self.landmark_source}
        pack_module(arrays, "params/generator", self.generator)
        pack_module(arrays, "params/discriminator", self.discriminator)
        pack_optimizer(arrays, meta, "opt/generator", self.g_opt)
        pack_optimizer(arrays, meta, "opt/discriminator", self.d_opt)
        return Checkpoint(
            kind=self.kind,
            step=self.step_count,
            config=self.config.as_dict(),
            arrays=arrays,
            meta=meta,
        )

    @classmethod
    def from_checkpoint(
        cls,
        ckpt: Checkpoint,
        dataset: FaceDataset,
        landmark_net: LandmarkNet | None = None,
    ) -> "InpaintTrainer":
        ckpt.require_kind(cls.kind)
        trainer = cls(
            dataset,
            TrainConfig(**ckpt.config),
            landmark_source=ckpt.meta.get("landmark_source", "ground_truth"),
            landmark_net=landmark_net,
        )
        unpack_module(ckpt, "params/generator", trainer.generator)
        unpack_module(ckpt, "params/discriminator", trainer.discriminator)
        unpack_optimizer(ckpt, "opt/generator", trainer.g_opt)
        unpack_optimizer(ckpt, "opt/discriminator", trainer.d_opt)
        trainer.step_count = ckpt.step
        return trainer


def _run_trainer(trainer, out_dir, log_name, columns, row_fn, ckpt_name):
    cfg = trainer.config
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    rows = []
    while trainer.step_count < cfg.max_steps:
        result = trainer.step()
        rows.append(row_fn(trainer.step_count - 1, result))
        if out and cfg.checkpoint_every and trainer.step_count % cfg.checkpoint_every == 0:
            save_checkpoint(trainer.checkpoint(), out / f"{ckpt_name}-{trainer.step_count:06d}.ckpt")
    final = trainer.checkpoint()
    if out:
        _write_loss_log(out / log_name, columns, rows)
        save_checkpoint(final, out / f"{ckpt_name}.ckpt")
    return final


def train_landmark_module(
    dataset: FaceDataset,
    config: TrainConfig,
    augmenter: Augmenter | None = None,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> Checkpoint:
    """Train the landmark predictor; returns (and optionally saves) the final
    checkpoint plus a step,l_lmk loss log."""
    if resume_from:
        trainer = LandmarkTrainer.from_checkpoint(
            load_checkpoint(resume_from), dataset, augmenter
        )
    else:
        trainer = LandmarkTrainer(dataset, config, augmenter)
    return _run_trainer(
        trainer,
        out_dir,
        "landmark_loss.csv",
        ("step", "l_lmk"),
        lambda step, loss: (step, loss),
        "landmark",
    )


def train_inpaint_module(
    dataset: FaceDataset,
    config: TrainConfig,
    landmark_source: str = "ground_truth",
    landmark_net: LandmarkNet | None = None,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> Checkpoint:
    """Adversarially train generator + discriminator; logs all five generator
    loss components plus the discriminator loss per step."""
    if resume_from:
        trainer = InpaintTrainer.from_checkpoint(
            load_checkpoint(resume_from), dataset, landmark_net
        )
    else:
        trainer = InpaintTrainer(dataset, config, landmark_source, landmark_net)
    return _run_trainer(
        trainer,
        out_dir,
        "inpaint_loss.csv",
        LOSS_LOG_COLUMNS,
        lambda step, row: tuple(row[c] if c != "step" else step for c in LOSS_LOG_COLUMNS),
        "inpaint",
    )


# ---------------------------------------------------------------------------
# Checkpoint -> network restoration
# ---------------------------------------------------------------------------


def load_landmark_net(ckpt: Checkpoint) -> LandmarkNet:
    ckpt.require_kind("landmark")
    config = TrainConfig(**ckpt.config)
    net = LandmarkNet(config.landmark_net_config())
    unpack_module(ckpt, "params/landmark_net", net)
    net.eval()
    return net


def load_inpaint_nets(ckpt: Checkpoint) -> tuple[InpaintGenerator, PatchDiscriminator]:
    ckpt.require_kind("inpaint")
    config = TrainConfig(**ckpt.config)
    generator = InpaintGenerator(config.generator_config())
    discriminator = PatchDiscriminator(config.discriminator_config())
    unpack_module(ckpt, "params/generator", generator)
    unpack_module(ckpt, "params/discriminator", discriminator)
    generator.eval()
    discriminator.eval()
    return generator, discriminator
