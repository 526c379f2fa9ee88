"""Deterministic image corruptions for robustness evaluation.

Each transform takes a batch tensor (N, C, H, W) in [0, 1] and a seed; the
random ones derive their draws from that seed only, so a table computed
twice is identical.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F


def _separable_blur(images: torch.Tensor, kernel: torch.Tensor) -> torch.Tensor:
    channels = images.shape[1]
    k = kernel.numel()
    pad = k // 2
    kx = kernel.view(1, 1, 1, k).repeat(channels, 1, 1, 1)
    ky = kernel.view(1, 1, k, 1).repeat(channels, 1, 1, 1)
    out = F.conv2d(F.pad(images, (pad, pad, 0, 0), mode="reflect"), kx, groups=channels)
    out = F.conv2d(F.pad(out, (0, 0, pad, pad), mode="reflect"), ky, groups=channels)
    return out


def gaussian_blur(images: torch.Tensor, seed: int = 0, sigma: float = 1.0) -> torch.Tensor:
    half = 2
    xs = torch.arange(-half, half + 1, dtype=images.dtype)
    kernel = torch.exp(-0.5 * (xs / sigma) ** 2)
    kernel = kernel / kernel.sum()
    return _separable_blur(images, kernel)


def motion_blur(images: torch.Tensor, seed: int = 0, length: int = 5) -> torch.Tensor:
    channels = images.shape[1]
    pad = length // 2
    kernel = torch.full((1, 1, 1, length), 1.0 / length, dtype=images.dtype)
    kernel = kernel.repeat(channels, 1, 1, 1)
    padded = F.pad(images, (pad, length - 1 - pad, 0, 0), mode="reflect")
    return F.conv2d(padded, kernel, groups=channels)


def random_gamma(images: torch.Tensor, seed: int = 0,
                 gamma_range: tuple[float, float] = (0.7, 1.4)) -> torch.Tensor:
    rng = np.random.default_rng([seed, 1])
    gammas = rng.uniform(*gamma_range, size=images.shape[0])
    g = torch.as_tensor(gammas, dtype=images.dtype).view(-1, 1, 1, 1)
    return images.clamp(min=1e-6) ** g


def pixel_dropout(images: torch.Tensor, seed: int = 0, p: float = 0.1) -> torch.Tensor:
    rng = np.random.default_rng([seed, 2])
    mask = rng.random(size=(images.shape[0], 1) + images.shape[2:]) >= p
    return images * torch.as_tensor(mask, dtype=images.dtype)


# Evaluation order: the untransformed column comes first.
ROBUSTNESS_TRANSFORMS = (
    ("wo", None),
    ("gaussian_blur", gaussian_blur),
    ("motion_blur", motion_blur),
    ("random_gamma", random_gamma),
    ("dropout", pixel_dropout),
)
