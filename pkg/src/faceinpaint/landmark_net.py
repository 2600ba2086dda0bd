"""Landmark prediction subnet: corrupted face -> 68 normalized (x, y) points.

A MobileNetV2-style stack of inverted residual bottlenecks feeds three fused
feature branches (two from the 320-channel stage, one from the 1280-channel
head) whose pooled concatenation is fully connected to 136 outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .imaging import NUM_LANDMARKS, CorruptedImage, LandmarkSet
from .init import init_parameters


@dataclass(frozen=True)
class BottleneckSpec:
    """One inverted-residual stage: (expansion t, channels c, repeats n, stride s)."""

    expansion_factor: int
    output_channels: int
    repeats: int
    first_stride: int

    def __post_init__(self):
        if self.expansion_factor < 1:
            raise ValueError(f"expansion factor must be >= 1, got {self.expansion_factor}")
        if self.first_stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {self.first_stride}")


DEFAULT_STAGES = (
    BottleneckSpec(1, 16, 1, 1),
    BottleneckSpec(6, 24, 2, 2),
    BottleneckSpec(6, 32, 3, 2),
    BottleneckSpec(6, 64, 4, 2),
    BottleneckSpec(6, 96, 3, 1),
    BottleneckSpec(6, 160, 3, 2),
    BottleneckSpec(6, 320, 1, 1),
)


@dataclass(frozen=True)
class LandmarkNetConfig:
    input_size: int = 256
    stem_channels: int = 32
    stage_specs: tuple[BottleneckSpec, ...] = DEFAULT_STAGES
    head_channels: int = 1280
    fusion_dims: tuple[int, int, int] = (128, 128, 64)  # S1, S2, S3
    output_dim: int = 2 * NUM_LANDMARKS

    def __post_init__(self):
        if self.output_dim != 2 * NUM_LANDMARKS:
            raise ValueError(f"output_dim must be {2 * NUM_LANDMARKS}")
        if self.input_size % 32 != 0:
            raise ValueError("input size must be divisible by the total stride (32)")

    @property
    def fusion_concat_dim(self) -> int:
        return sum(self.fusion_dims)

    def scaled(self, divisor: int) -> "LandmarkNetConfig":
        """Desk-scale variant: channel widths divided, block structure kept."""
        return LandmarkNetConfig(
            input_size=self.input_size,
            stem_channels=self.stem_channels // divisor,
            stage_specs=tuple(
                BottleneckSpec(s.expansion_factor, s.output_channels // divisor,
                               s.repeats, s.first_stride)
                for s in self.stage_specs
            ),
            head_channels=self.head_channels // divisor,
            fusion_dims=tuple(d // divisor for d in self.fusion_dims),
            output_dim=self.output_dim,
        )


DESK_LANDMARK_CONFIG = LandmarkNetConfig(input_size=64).scaled(4)


class InvertedResidual(nn.Module):
    """expand (1x1) -> depthwise 3x3 -> project (1x1); residual when shapes allow."""

    def __init__(self, in_channels: int, out_channels: int, stride: int, expansion: int):
        super().__init__()
        hidden = in_channels * expansion
        self.use_residual = stride == 1 and in_channels == out_channels
        layers = []
        if expansion != 1:
            layers += [
                nn.Conv2d(in_channels, hidden, 1, bias=False),
                nn.BatchNorm2d(hidden),
                nn.ReLU6(inplace=True),
            ]
        layers += [
            nn.Conv2d(hidden, hidden, 3, stride=stride, padding=1, groups=hidden, bias=False),
            nn.BatchNorm2d(hidden),
            nn.ReLU6(inplace=True),
            nn.Conv2d(hidden, out_channels, 1, bias=False),
            nn.BatchNorm2d(out_channels),
        ]
        self.block = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.block(x)
        return x + out if self.use_residual else out


class LandmarkNet(nn.Module):
    def __init__(self, config: LandmarkNetConfig | None = None):
        super().__init__()
        self.config = config or LandmarkNetConfig()
        cfg = self.config

        self.stem = nn.Sequential(
            nn.Conv2d(3, cfg.stem_channels, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(cfg.stem_channels),
            nn.ReLU6(inplace=True),
        )
        stages = []
        in_ch = cfg.stem_channels
        for spec in cfg.stage_specs:
            for i in range(spec.repeats):
                stride = spec.first_stride if i == 0 else 1
                stages.append(
                    InvertedResidual(in_ch, spec.output_channels, stride,
                                     spec.expansion_factor)
                )
                in_ch = spec.output_channels
        self.stages = nn.Sequential(*stages)

        c1_channels = cfg.stage_specs[-1].output_channels
        self.head = nn.Sequential(
            nn.Conv2d(c1_channels, cfg.head_channels, 1, bias=False),
            nn.BatchNorm2d(cfg.head_channels),
            nn.ReLU6(inplace=True),
        )
        s1, s2, s3 = cfg.fusion_dims
        self.branch_s1 = nn.Conv2d(c1_channels, s1, 1)
        self.branch_s2 = nn.Conv2d(cfg.head_channels, s2, 1)
        self.branch_s3 = nn.Conv2d(cfg.head_channels, s3, 1)
        self.fc = nn.Linear(cfg.fusion_concat_dim, cfg.output_dim)

    def features(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Return (C1, C2): the bottleneck output and the 1x1-conv head output."""
        c1 = self.stages(self.stem(x))
        return c1, self.head(c1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Input (B, 3, S, S) -> raw landmark coordinates (B, 68, 2), unclamped."""
        if x.shape[-1] != self.config.input_size or x.shape[-2] != self.config.input_size:
            raise ValueError(
                f"expected {self.config.input_size}x{self.config.input_size} input, "
                f"got {tuple(x.shape[-2:])}"
            )
        c1, c2 = self.features(x)
        s1 = F.adaptive_avg_pool2d(self.branch_s1(c1), 1).flatten(1)
        s2 = F.adaptive_avg_pool2d(self.branch_s2(c2), 1).flatten(1)
        s3 = self.branch_s3(F.adaptive_avg_pool2d(c2, 1)).flatten(1)
        fused = torch.cat([s1, s2, s3], dim=1)
        return self.fc(fused).reshape(-1, NUM_LANDMARKS, 2)


def build_landmark_net(
    config: LandmarkNetConfig | None = None, rng_seed: int = 0
) -> LandmarkNet:
    """Construct a LandmarkNet with seed-deterministic initialization.

    The regression head starts at zero weights with bias 0.5, so the initial
    prediction is the frame center for every point; kaiming-scaled fused
    features would otherwise put the initial outputs far outside [0, 1].
    """
    net = LandmarkNet(config)
    init_parameters(net, rng_seed)
    with torch.no_grad():
        net.fc.weight.zero_()
        net.fc.bias.fill_(0.5)
    return net


def predict_landmarks(net: LandmarkNet, corrupted: CorruptedImage) -> LandmarkSet:
    """Run the predictor on one corrupted image; output clamped to [0, 1]."""
    size = net.config.input_size
    if corrupted.pixels.shape[:2] != (size, size):
        raise ValueError(
            f"expected {size}x{size} input, got {corrupted.pixels.shape[:2]}"
        )
    x = torch.from_numpy(np.array(corrupted.pixels)).permute(2, 0, 1)
    was_training = net.training
    net.eval()
    with torch.no_grad():
        pred = net(x.unsqueeze(0))[0]
    if was_training:
        net.train()
    return LandmarkSet(pred.clamp(0.0, 1.0).numpy())


def landmark_loss(pred, gt) -> torch.Tensor | float:
    """Squared L2 distance between landmark vectors (sum over 136 coordinates).

    Accepts LandmarkSet pairs (returns a float) or tensors shaped (..., 68, 2)
    (returns a tensor; batched inputs are averaged over the batch).
    """
    if isinstance(pred, LandmarkSet) and isinstance(gt, LandmarkSet):
        diff = pred.points.astype(np.float64) - gt.points.astype(np.float64)
        return float((diff**2).sum())
    if pred.shape[-2:] != (NUM_LANDMARKS, 2) or gt.shape[-2:] != (NUM_LANDMARKS, 2):
        raise ValueError(
            f"landmark tensors must end in ({NUM_LANDMARKS}, 2), "
            f"got {tuple(pred.shape)} and {tuple(gt.shape)}"
        )
    sq = ((pred - gt) ** 2).sum(dim=(-1, -2))
    return sq.mean() if sq.dim() > 0 else sq
