"""Seed-deterministic parameter initialization shared by all networks."""

from __future__ import annotations

import math

import torch
from torch import nn

from .attention import LongShortTermAttention
from .spectral import SpectralConv2d


def init_parameters(module: nn.Module, rng_seed: int) -> None:
    """Kaiming fan-in init for conv/linear weights, zeros for biases,
    ones/zeros for normalization affine terms.

    Uses an explicit generator so two builds from the same seed are
    bitwise-identical. Attention gates and the LSTA identity projection keep
    their construction-time values.
    """
    gen = torch.Generator().manual_seed(rng_seed)
    skip = set()
    for m in module.modules():
        if isinstance(m, LongShortTermAttention):
            skip.add(m.out_proj.weight)
            skip.add(m.out_proj.bias)
    for name, m in sorted(module.named_modules(), key=lambda kv: kv[0]):
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear, SpectralConv2d)):
            if m.weight in skip:
                continue
            # weight.shape[1] is in_channels/groups, so depthwise convs are
            # handled without a special case.
            fan_in = m.weight.shape[1] * (
                m.weight[0, 0].numel() if m.weight.dim() > 2 else 1
            )
            if isinstance(m, nn.ConvTranspose2d):
                # Transposed conv weight is (in, out, kh, kw).
                fan_in = m.weight.shape[0] * m.weight[0, 0].numel()
            std = math.sqrt(2.0 / max(fan_in, 1))
            with torch.no_grad():
                m.weight.copy_(
                    torch.randn(m.weight.shape, generator=gen) * std
                )
                if m.bias is not None:
                    m.bias.zero_()
            if isinstance(m, SpectralConv2d):
                with torch.no_grad():
                    u = torch.randn(m.u.shape, generator=gen)
                    m.u.copy_(u / u.norm().clamp_min(1e-12))
        elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d, nn.GroupNorm)):
            if m.weight is not None:
                with torch.no_grad():
                    m.weight.fill_(1.0)
                    m.bias.zero_()
