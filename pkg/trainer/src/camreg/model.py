"""Convolutional regressor with image-size features in the head.

The backbone is a stack of strided conv blocks pooled to a global feature
vector; the normalized image width and height are concatenated onto that
vector before the fully connected head, giving the head direct access to the
scale the image was captured at.  The output layer has exactly eight units,
one per camera parameter target.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import TrainConfig

OUTPUT_DIM = 8


class CameraParameterRegressor(nn.Module):
    def __init__(self, depth: int = 3, base_channels: int = 16,
                 in_channels: int = 3, hidden_dim: int = 64,
                 use_size_features: bool = True):
        super().__init__()
        blocks = []
        channels = in_channels
        out_channels = base_channels
        for _ in range(depth):
            blocks += [
                nn.Conv2d(channels, out_channels, kernel_size=3, stride=2, padding=1),
                nn.GroupNorm(4, out_channels),
                nn.ReLU(inplace=True),
            ]
            channels = out_channels
            out_channels = min(out_channels * 2, 128)
        self.backbone = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.use_size_features = use_size_features
        self.backbone_feature_dim = channels
        self.penultimate_dim = channels + (2 if use_size_features else 0)
        self.head = nn.Sequential(
            nn.Linear(self.penultimate_dim, hidden_dim),
            nn.ReLU(inplace=True),
            nn.Linear(hidden_dim, OUTPUT_DIM),
        )
        # Zero-initialized output layer: training starts from the all-zero
        # prediction, so the initial loss is the target second moment rather
        # than initialization noise.
        nn.init.zeros_(self.head[-1].weight)
        nn.init.zeros_(self.head[-1].bias)

    def features(self, images: torch.Tensor, sizes: torch.Tensor) -> torch.Tensor:
        """Penultimate vector: pooled backbone features, size features appended."""
        feats = self.pool(self.backbone(images)).flatten(1)
        if self.use_size_features:
            feats = torch.cat([feats, sizes], dim=1)
        return feats

    def forward(self, images: torch.Tensor, sizes: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(images, sizes))


def build_model(cfg: TrainConfig) -> CameraParameterRegressor:
    torch.manual_seed(cfg.seed)
    return CameraParameterRegressor(depth=cfg.backbone_depth,
                                    use_size_features=cfg.use_size_features)
