"""Spectral normalization via power iteration."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

SIGMA_FLOOR = 1e-12


def spectral_normalize(
    weight: torch.Tensor, u_vector: torch.Tensor, iterations: int = 1
) -> tuple[torch.Tensor, torch.Tensor]:
    """Divide `weight` by its power-iteration top-singular-value estimate.

    The weight is viewed as a matrix of shape (out_channels, rest). Returns
    the normalized weight and the updated left singular vector estimate. The
    sigma estimate keeps a gradient path through `weight` (u and v are treated
    as constants), matching the usual GAN training recipe. A zero weight hits
    the sigma floor and comes back unchanged with `u_vector` untouched.
    """
    mat = weight.reshape(weight.shape[0], -1)
    u = u_vector
    v = None
    with torch.no_grad():
        for _ in range(iterations):
            v = F.normalize(mat.t() @ u, dim=0, eps=SIGMA_FLOOR)
            u = F.normalize(mat @ v, dim=0, eps=SIGMA_FLOOR)
    if v is None:  # iterations == 0: reuse the stored direction
        with torch.no_grad():
            v = F.normalize(mat.t() @ u, dim=0, eps=SIGMA_FLOOR)
    sigma = torch.dot(u, mat @ v)
    if float(sigma.detach()) < SIGMA_FLOOR:
        return weight, u_vector
    return weight / sigma, u


def power_iteration_sigma(
    weight: torch.Tensor, u_vector: torch.Tensor, iterations: int = 1
) -> torch.Tensor:
    """Current sigma estimate for `weight` given the stored u vector."""
    mat = weight.reshape(weight.shape[0], -1)
    u = u_vector
    with torch.no_grad():
        for _ in range(iterations):
            v = F.normalize(mat.t() @ u, dim=0, eps=SIGMA_FLOOR)
            u = F.normalize(mat @ v, dim=0, eps=SIGMA_FLOOR)
        return torch.dot(u, mat @ v)


class SpectralConv2d(nn.Module):
    """Conv2d whose weight is spectrally normalized on every forward pass.

    The power-iteration vector is updated only in training mode, so eval
    outputs are deterministic for fixed parameters.
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.weight = nn.Parameter(
            torch.empty(out_channels, in_channels, kernel_size, kernel_size)
        )
        self.bias = nn.Parameter(torch.zeros(out_channels))
        self.register_buffer("u", F.normalize(torch.randn(out_channels), dim=0))
        nn.init.kaiming_normal_(self.weight, mode="fan_in", nonlinearity="leaky_relu")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        weight, u_new = spectral_normalize(self.weight, self.u, iterations=1)
        if self.training:
            with torch.no_grad():
                self.u.copy_(u_new)
        return F.conv2d(x, weight, self.bias, stride=self.stride, padding=self.padding)
