"""Conditional 70x70 PatchGAN discriminator with spectral normalization.

Scores (image, landmark map) pairs patchwise: a 256x256 input yields a
30x30 sigmoid map, each cell judging one receptive-field patch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .attention import SelfAttention
from .imaging import Image, LandmarkMap
from .init import init_parameters
from .spectral import SpectralConv2d


@dataclass(frozen=True)
class DiscriminatorConfig:
    channel_widths: tuple[int, int, int, int] = (64, 128, 256, 512)
    leaky_slope: float = 0.2
    use_attention: bool = True
    use_landmark_channel: bool = True
    input_size: int = 256

    @property
    def input_channels(self) -> int:
        return 3 + (1 if self.use_landmark_channel else 0)

    def scaled(self, divisor: int) -> "DiscriminatorConfig":
        return DiscriminatorConfig(
            channel_widths=tuple(c // divisor for c in self.channel_widths),
            leaky_slope=self.leaky_slope,
            use_attention=self.use_attention,
            use_landmark_channel=self.use_landmark_channel,
            input_size=self.input_size,
        )


class PatchDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig | None = None):
        super().__init__()
        self.config = config or DiscriminatorConfig()
        cfg = self.config
        w1, w2, w3, w4 = cfg.channel_widths
        act = nn.LeakyReLU(cfg.leaky_slope, inplace=True)

        self.conv1 = SpectralConv2d(cfg.input_channels, w1, 4, stride=2, padding=1)
        self.conv2 = SpectralConv2d(w1, w2, 4, stride=2, padding=1)
        # Attention sits on the stride-2 output of conv2 (w2 channels).
        self.attention = SelfAttention(w2) if cfg.use_attention else None
        self.conv3 = SpectralConv2d(w2, w3, 4, stride=2, padding=1)
        self.conv4 = SpectralConv2d(w3, w4, 4, stride=1, padding=1)
        self.conv5 = SpectralConv2d(w4, 1, 4, stride=1, padding=1)
        self.act = act

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Input (B, 3+lmk, H, W) -> patch score map (B, 1, H/8 - 2, W/8 - 2)."""
        if x.shape[1] != self.config.input_channels:
            raise ValueError(
                f"expected {self.config.input_channels} input channels, got {x.shape[1]}"
            )
        h = self.act(self.conv1(x))
        h = self.act(self.conv2(h))
        if self.attention is not None:
            h = self.attention(h)
        h = self.act(self.conv3(h))
        h = self.act(self.conv4(h))
        return torch.sigmoid(self.conv5(h))

    def spectral_layers(self) -> list[SpectralConv2d]:
        return [m for m in self.modules() if isinstance(m, SpectralConv2d)]


def build_discriminator(
    config: DiscriminatorConfig | None = None, rng_seed: int = 0
) -> PatchDiscriminator:
    """Construct a PatchDiscriminator with seed-deterministic initialization."""
    net = PatchDiscriminator(config)
    init_parameters(net, rng_seed)
    return net


def discriminator_input(
    image_pixels: torch.Tensor, lmap: torch.Tensor | None, use_landmark_channel: bool
) -> torch.Tensor:
    """Concatenate image (B, 3, H, W) with a landmark channel (B, 1, H, W)."""
    if not use_landmark_channel:
        return image_pixels
    if lmap is None:
        raise ValueError("landmark map required when the landmark channel is enabled")
    return torch.cat([image_pixels, lmap], dim=1)


def discriminate(net: PatchDiscriminator, image: Image, lmap: LandmarkMap) -> np.ndarray:
    """Per-patch realism scores for one image, as a (H', W') array in (0, 1)."""
    size = net.config.input_size
    if image.pixels.shape[:2] != (size, size):
        raise ValueError(f"expected {size}x{size} input, got {image.pixels.shape[:2]}")
    if lmap.pixels.shape != image.pixels.shape[:2]:
        raise ValueError(
            f"landmark map {lmap.pixels.shape} vs image {image.pixels.shape[:2]}"
        )
    img = torch.from_numpy(np.array(image.pixels)).permute(2, 0, 1).unsqueeze(0)
    lm = torch.from_numpy(lmap.pixels.astype(np.float32))[None, None]
    x = discriminator_input(img, lm, net.config.use_landmark_channel)
    was_training = net.training
    net.eval()
    with torch.no_grad():
        scores = net(x)[0, 0]
    if was_training:
        net.train()
    return scores.numpy()
