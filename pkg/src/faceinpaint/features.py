"""Feature extractors for the perceptual and style losses.

An extractor maps a batch of images (B, 3, H, W) to an ordered list of
feature stacks (B, N_p, H_p, W_p). Extractors are frozen and deterministic;
the inpaintor never trains through them.
"""

from __future__ import annotations

from typing import Protocol

import torch
from torch import nn


class FeatureExtractor(Protocol):
    def __call__(self, images: torch.Tensor) -> list[torch.Tensor]: ...


class IdentityExtractor:
    """Single layer of raw pixels; makes every loss hand-checkable."""

    def __call__(self, images: torch.Tensor) -> list[torch.Tensor]:
        return [images]


class VggFeatureExtractor(nn.Module):
    """relu1_1 .. relu5_1 activations of an ImageNet-pretrained VGG-19.

    Requires torchvision and downloadable (or locally cached) weights; the
    test suite never depends on it.
    """

    # Indices of relu1_1, relu2_1, relu3_1, relu4_1, relu5_1 in vgg19.features.
    LAYER_INDICES = (1, 6, 11, 20, 29)

    def __init__(self, weights: str = "IMAGENET1K_V1"):
        super().__init__()
        try:
            from torchvision.models import vgg19
        except ImportError as exc:
            raise RuntimeError(
                "VggFeatureExtractor requires torchvision (pip install "
                "faceinpaint[vgg])"
            ) from exc
        try:
            backbone = vgg19(weights=weights).features
        except Exception as exc:
            raise RuntimeError(
                f"could not load VGG-19 weights ({exc}); pass an identity or "
                "custom extractor instead"
            ) from exc
        self.slices = nn.ModuleList()
        start = 0
        for end in self.LAYER_INDICES:
            self.slices.append(backbone[start : end + 1])
            start = end + 1
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()
        self.register_buffer("mean", torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1))

    def __call__(self, images: torch.Tensor) -> list[torch.Tensor]:
        # Images arrive in [-1, 1]; VGG expects ImageNet-normalized [0, 1].
        x = ((images + 1.0) / 2.0 - self.mean) / self.std
        feats = []
        for block in self.slices:
            x = block(x)
            feats.append(x)
        return feats
