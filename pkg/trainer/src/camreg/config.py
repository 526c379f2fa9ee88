"""Training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class TransformFlags:
    """Which robustness transforms the evaluation applies."""

    gaussian_blur: bool = True
    motion_blur: bool = True
    random_gamma: bool = True
    dropout: bool = True


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    initial_lr: float = 0.01
    milestones: tuple[int, ...] = (20, 40)
    epochs: int = 60
    backbone_depth: int = 3
    seed: int = 0
    # Disable to emulate the earlier model variants that regress from image
    # content alone, without the size features in the head.
    use_size_features: bool = True
    transforms: TransformFlags = field(default_factory=TransformFlags)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.initial_lr <= 0:
            raise ValueError(f"initial_lr must be positive, got {self.initial_lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.backbone_depth < 1:
            raise ValueError(f"backbone_depth must be >= 1, got {self.backbone_depth}")
        ms = self.milestones
        if any(b <= a for a, b in zip(ms, ms[1:])) or any(m >= self.epochs for m in ms):
            raise ValueError(
                f"milestones must be strictly increasing and below epochs, "
                f"got {ms} for {self.epochs} epochs")
