"""Training objectives: per-pixel, perceptual, style, TV, LSGAN, and the
weighted total.

All functions take torch tensors shaped (B, C, H, W) (masks (B, 1, H, W))
and return scalar tensors, so they are differentiable and usable directly in
training steps. Batched inputs are averaged over the batch.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import torch

from .features import FeatureExtractor, IdentityExtractor


class NonFiniteLossError(RuntimeError):
    """A loss component became NaN/inf; the training step must abort."""


@dataclass(frozen=True)
class LossWeights:
    perceptual: float = 0.1
    style: float = 250.0
    tv: float = 0.1
    adversarial: float = 0.01

    def __post_init__(self):
        for name in ("perceptual", "style", "tv", "adversarial"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be nonnegative")


def _check_shapes(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def pixel_loss(
    generated: torch.Tensor, target: torch.Tensor, mask: torch.Tensor
) -> torch.Tensor:
    """Whole-frame L1 error divided by the hole size (pixels x channels).

    Small holes are penalized hard, large ones leniently. An empty mask falls
    back to a plain mean over the frame, with a warning.
    """
    _check_shapes(generated, target)
    if mask.shape[-2:] != generated.shape[-2:]:
        raise ValueError(
            f"mask {tuple(mask.shape[-2:])} vs image {tuple(generated.shape[-2:])}"
        )
    abs_err = (generated - target).abs().sum()
    n_m = mask.sum() * generated.shape[-3]
    if float(n_m) == 0.0:
        warnings.warn("empty mask: pixel loss falls back to a frame mean", stacklevel=2)
        return (generated - target).abs().mean()
    return abs_err / n_m


def gram(features: torch.Tensor) -> torch.Tensor:
    """Gram matrix phi^T phi of a feature stack.

    (C, H, W) -> (C, C); batched (B, C, H, W) -> (B, C, C). Rows of phi are
    spatial positions, columns are channels.
    """
    squeeze = features.dim() == 3
    feats = features.unsqueeze(0) if squeeze else features
    b, c = feats.shape[0], feats.shape[1]
    phi = feats.reshape(b, c, -1).transpose(1, 2)  # B x HW x C
    out = torch.bmm(phi.transpose(1, 2), phi)
    return out[0] if squeeze else out


def style_loss(
    generated: torch.Tensor,
    target: torch.Tensor,
    mask: torch.Tensor,
    extractor: FeatureExtractor | None = None,
) -> torch.Tensor:
    """Gram-matrix distance between the hole regions of the two images.

    Images are masked to the hole first (hole kept, rest zeroed), then
    featurized; each layer contributes
    (1/N_p^2) * || (G_p(gen) - G_p(tgt)) / (N_p H_p W_p) ||_1.
    """
    _check_shapes(generated, target)
    extractor = extractor or IdentityExtractor()
    masked_gen = generated * mask
    masked_tgt = target * mask
    total = generated.new_zeros(())
    for f_gen, f_tgt in zip(extractor(masked_gen), extractor(masked_tgt)):
        b, n_p, h_p, w_p = f_gen.shape
        diff = (gram(f_gen) - gram(f_tgt)) / (n_p * h_p * w_p)
        total = total + diff.abs().sum() / (n_p * n_p * b)
    return total


def perceptual_loss(
    generated: torch.Tensor,
    target: torch.Tensor,
    extractor: FeatureExtractor | None = None,
) -> torch.Tensor:
    """L1 feature distance, each layer normalized by its element count."""
    _check_shapes(generated, target)
    extractor = extractor or IdentityExtractor()
    total = generated.new_zeros(())
    for f_gen, f_tgt in zip(extractor(generated), extractor(target)):
        b, n_p, h_p, w_p = f_gen.shape
        total = total + (f_gen - f_tgt).abs().sum() / (n_p * h_p * w_p * b)
    return total


def tv_loss(image: torch.Tensor) -> torch.Tensor:
    """Total variation: (||forward h-diffs||_1 + ||forward v-diffs||_1) / (H*W).

    Summed over channels, averaged over the batch.
    """
    x = image.unsqueeze(0) if image.dim() == 3 else image
    b, _, h, w = x.shape
    horiz = (x[..., :, 1:] - x[..., :, :-1]).abs().sum()
    vert = (x[..., 1:, :] - x[..., :-1, :]).abs().sum()
    return (horiz + vert) / (h * w * b)


def adversarial_g_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    """LSGAN generator objective: push fake patch scores toward 1."""
    return ((fake_scores - 1.0) ** 2).mean()


def adversarial_d_loss(
    fake_scores: torch.Tensor, real_scores: torch.Tensor
) -> torch.Tensor:
    """LSGAN discriminator objective: fakes toward 0, reals toward 1."""
    return (fake_scores**2).mean() + ((real_scores - 1.0) ** 2).mean()


@dataclass
class GeneratorLossComponents:
    pixel: torch.Tensor
    perceptual: torch.Tensor
    style: torch.Tensor
    tv: torch.Tensor
    adversarial: torch.Tensor

    def as_dict(self) -> dict[str, float]:
        def value(x):
            return float(x.detach()) if hasattr(x, "detach") else float(x)

        return {
            "l_pixel": value(self.pixel),
            "l_perc": value(self.perceptual),
            "l_style": value(self.style),
            "l_tv": value(self.tv),
            "l_advG": value(self.adversarial),
        }


def total_generator_loss(
    components: GeneratorLossComponents, weights: LossWeights | None = None
) -> torch.Tensor:
    """Weighted sum of the five generator objectives."""
    weights = weights or LossWeights()
    for name in ("pixel", "perceptual", "style", "tv", "adversarial"):
        value = getattr(components, name)
        scalar = float(value.detach()) if hasattr(value, "detach") else float(value)
        if not torch.isfinite(torch.as_tensor(scalar)):
            raise NonFiniteLossError(
                f"non-finite {name} loss ({scalar}); aborting step. "
                f"components: {components.as_dict()}"
            )
    return (
        components.pixel
        + weights.perceptual * components.perceptual
        + weights.style * components.style
        + weights.tv * components.tv
        + weights.adversarial * components.adversarial
    )
