"""Inpainting generator: (corrupted image, landmark map) -> full-frame image.

U-Net layout: three encoder convs, seven dilated residual blocks, a
long-short term attention fusion of the deepest encoder and residual
features, and a mirrored decoder with channel-attention (1x1 conv) skip
fusion. Instance normalization throughout; tanh output in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .attention import LongShortTermAttention
from .imaging import CorruptedImage, Image, LandmarkMap
from .init import init_parameters


@dataclass(frozen=True)
class GeneratorConfig:
    encoder_channels: tuple[int, int, int] = (64, 128, 256)
    num_dilated_blocks: int = 7
    dilation: int = 2
    use_lsta: bool = True
    use_landmark_channel: bool = True
    input_size: int = 256

    @property
    def input_channels(self) -> int:
        return 3 + (1 if self.use_landmark_channel else 0)

    def scaled(self, divisor: int) -> "GeneratorConfig":
        return GeneratorConfig(
            encoder_channels=tuple(c // divisor for c in self.encoder_channels),
            num_dilated_blocks=self.num_dilated_blocks,
            dilation=self.dilation,
            use_lsta=self.use_lsta,
            use_landmark_channel=self.use_landmark_channel,
            input_size=self.input_size,
        )


def _conv_in_relu(in_ch, out_ch, kernel, stride, padding, reflect=False):
    pad = [nn.ReflectionPad2d(padding)] if reflect else []
    conv_pad = 0 if reflect else padding
    return nn.Sequential(
        *pad,
        nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=conv_pad),
        nn.InstanceNorm2d(out_ch, affine=True),
        nn.ReLU(inplace=True),
    )


class DilatedResidualBlock(nn.Module):
    """x + F(x) with F = dilated conv -> norm -> relu -> dilated conv -> norm.

    `normalize=False` drops the instance norms; used by locality probes, since
    per-channel normalization couples every spatial position.
    """

    def __init__(self, channels: int, dilation: int = 2, normalize: bool = True):
        super().__init__()
        pad = dilation

        def norm():
            return [nn.InstanceNorm2d(channels, affine=True)] if normalize else []

        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=pad, dilation=dilation),
            *norm(),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, padding=pad, dilation=dilation),
            *norm(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.body[0].in_channels:
            raise ValueError(
                f"expected {self.body[0].in_channels} channels, got {x.shape[1]}"
            )
        return x + self.body(x)


class InpaintGenerator(nn.Module):
    def __init__(self, config: GeneratorConfig | None = None):
        super().__init__()
        self.config = config or GeneratorConfig()
        cfg = self.config
        c1, c2, c3 = cfg.encoder_channels

        self.enc1 = _conv_in_relu(cfg.input_channels, c1, 7, 1, 3, reflect=True)
        self.enc2 = _conv_in_relu(c1, c2, 4, 2, 1)
        self.enc3 = _conv_in_relu(c2, c3, 4, 2, 1)
        self.res_blocks = nn.ModuleList(
            DilatedResidualBlock(c3, cfg.dilation)
            for _ in range(cfg.num_dilated_blocks)
        )
        if cfg.use_lsta:
            self.lsta = LongShortTermAttention(c3)
            self.lsta_fallback = None
        else:
            # Ablation keeps downstream shapes: 1x1 conv over concat(E3, R7).
            self.lsta = None
            self.lsta_fallback = nn.Conv2d(2 * c3, c3, 1)

        self.dec1 = nn.Sequential(
            nn.ConvTranspose2d(c3, c2, 4, stride=2, padding=1),
            nn.InstanceNorm2d(c2, affine=True),
            nn.ReLU(inplace=True),
        )
        self.skip_fuse1 = _conv_in_relu(2 * c2, 2 * c2, 1, 1, 0)
        self.dec2 = nn.Sequential(
            nn.ConvTranspose2d(2 * c2, c1, 4, stride=2, padding=1),
            nn.InstanceNorm2d(c1, affine=True),
            nn.ReLU(inplace=True),
        )
        self.skip_fuse2 = _conv_in_relu(2 * c1, 2 * c1, 1, 1, 0)
        self.final = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(2 * c1, 3, 7),
            nn.InstanceNorm2d(3, affine=True),
            nn.Tanh(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Input (B, 3+lmk, H, W) -> full-frame output (B, 3, H, W) in [-1, 1]."""
        if x.shape[1] != self.config.input_channels:
            raise ValueError(
                f"expected {self.config.input_channels} input channels, got {x.shape[1]}"
            )
        if x.shape[-1] % 4 or x.shape[-2] % 4:
            raise ValueError(f"spatial dims must be divisible by 4, got {tuple(x.shape[-2:])}")
        e1 = self.enc1(x)
        e2 = self.enc2(e1)
        e3 = self.enc3(e2)
        h = e3
        for block in self.res_blocks:
            h = block(h)
        if self.lsta is not None:
            h = self.lsta(e3, h)
        else:
            h = self.lsta_fallback(torch.cat([e3, h], dim=1))
        d1 = self.dec1(h)
        d1 = self.skip_fuse1(torch.cat([e2, d1], dim=1))
        d2 = self.dec2(d1)
        d2 = self.skip_fuse2(torch.cat([e1, d2], dim=1))
        return self.final(d2)


def build_generator(
    config: GeneratorConfig | None = None, rng_seed: int = 0
) -> InpaintGenerator:
    """Construct an InpaintGenerator with seed-deterministic initialization."""
    net = InpaintGenerator(config)
    init_parameters(net, rng_seed)
    return net


def generator_input(
    corrupted: CorruptedImage, lmap: LandmarkMap | None, use_landmark_channel: bool
) -> torch.Tensor:
    """Stack the corrupted image (and landmark map) into a (1, C, H, W) tensor."""
    img = torch.from_numpy(np.array(corrupted.pixels)).permute(2, 0, 1)
    if not use_landmark_channel:
        return img.unsqueeze(0)
    if lmap is None:
        raise ValueError("landmark map required when the landmark channel is enabled")
    if lmap.pixels.shape != corrupted.pixels.shape[:2]:
        raise ValueError(
            f"landmark map {lmap.pixels.shape} vs image {corrupted.pixels.shape[:2]}"
        )
    lm = torch.from_numpy(lmap.pixels.astype(np.float32)).unsqueeze(0)
    return torch.cat([img, lm], dim=0).unsqueeze(0)


def forward_generator(
    net: InpaintGenerator, corrupted: CorruptedImage, lmap: LandmarkMap
) -> Image:
    """Raw full-frame output; compositing back onto the original is the caller's job."""
    size = net.config.input_size
    if corrupted.pixels.shape[:2] != (size, size):
        raise ValueError(
            f"expected {size}x{size} input, got {corrupted.pixels.shape[:2]}"
        )
    x = generator_input(corrupted, lmap, net.config.use_landmark_channel)
    was_training = net.training
    net.eval()
    with torch.no_grad():
        out = net(x)[0]
    if was_training:
        net.train()
    return Image(out.permute(1, 2, 0).numpy())
