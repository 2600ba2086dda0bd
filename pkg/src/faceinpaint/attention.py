"""Spatial self-attention blocks used by the generator and discriminator."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def _identity_conv1x1(channels: int) -> nn.Conv2d:
    conv = nn.Conv2d(channels, channels, kernel_size=1)
    with torch.no_grad():
        conv.weight.copy_(torch.eye(channels).reshape(channels, channels, 1, 1))
        conv.bias.zero_()
    return conv


class SelfAttention(nn.Module):
    """Single-head spatial self-attention with a zero-initialized gate.

    out = x + gamma * (A @ x), where A is the row-stochastic attention map
    computed from 1x1 query/key projections of x. With gamma = 0 the block is
    an exact identity, so inserting it never perturbs a freshly built network.
    """

    def __init__(self, channels: int, key_channels: int | None = None):
        super().__init__()
        key_channels = key_channels or max(channels // 8, 1)
        self.query = nn.Conv2d(channels, key_channels, kernel_size=1)
        self.key = nn.Conv2d(channels, key_channels, kernel_size=1)
        self.gamma = nn.Parameter(torch.zeros(1))

    def attention_map(self, x: torch.Tensor) -> torch.Tensor:
        """Row-stochastic (B, HW, HW) map; rows sum to 1."""
        b, _, h, w = x.shape
        q = self.query(x).flatten(2).transpose(1, 2)  # B x HW x K
        k = self.key(x).flatten(2)  # B x K x HW
        return F.softmax(torch.bmm(q, k), dim=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        attn = self.attention_map(x)
        context = torch.bmm(attn, x.flatten(2).transpose(1, 2))
        context = context.transpose(1, 2).reshape(b, c, h, w)
        return x + self.gamma * context


class LongShortTermAttention(nn.Module):
    """Fuse decoder features with encoder features through one attention map.

    Scores come from the decoder features (two learned 1x1 projections,
    softmax over spatial positions). The same map gathers a short-term
    context from the decoder features and a long-term context from the
    encoder features; both are mixed in through learned scalars initialized
    to zero, then projected by a 1x1 conv initialized to the identity. At
    initialization the block therefore returns the decoder features exactly.
    """

    def __init__(self, channels: int, key_channels: int | None = None):
        super().__init__()
        key_channels = key_channels or max(channels // 8, 1)
        self.query = nn.Conv2d(channels, key_channels, kernel_size=1)
        self.key = nn.Conv2d(channels, key_channels, kernel_size=1)
        self.gamma_short = nn.Parameter(torch.zeros(1))
        self.gamma_long = nn.Parameter(torch.zeros(1))
        self.out_proj = _identity_conv1x1(channels)

    def attention_map(self, decoder_feat: torch.Tensor) -> torch.Tensor:
        """Row-stochastic (B, HW, HW) map computed from the decoder features."""
        q = self.query(decoder_feat).flatten(2).transpose(1, 2)
        k = self.key(decoder_feat).flatten(2)
        return F.softmax(torch.bmm(q, k), dim=2)

    def forward(
        self, encoder_feat: torch.Tensor, decoder_feat: torch.Tensor
    ) -> torch.Tensor:
        if encoder_feat.shape != decoder_feat.shape:
            raise ValueError(
                f"encoder {tuple(encoder_feat.shape)} vs decoder "
                f"{tuple(decoder_feat.shape)} feature shapes must match"
            )
        b, c, h, w = decoder_feat.shape
        attn = self.attention_map(decoder_feat)
        short = torch.bmm(attn, decoder_feat.flatten(2).transpose(1, 2))
        long = torch.bmm(attn, encoder_feat.flatten(2).transpose(1, 2))
        short = short.transpose(1, 2).reshape(b, c, h, w)
        long = long.transpose(1, 2).reshape(b, c, h, w)
        fused = decoder_feat + self.gamma_short * short + self.gamma_long * long
        return self.out_proj(fused)
