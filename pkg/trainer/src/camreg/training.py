"""Training loop: MSE on encoded targets, AdamW, stepped learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .config import TrainConfig
from .data import ManifestDataset, load_manifest, resolution_batch_sampler
from .model import CameraParameterRegressor, build_model


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)


def _epoch_pass(model, dataset, batches, loss_fn, optimizer=None):
    total, count = 0.0, 0
    for indices in batches:
        images, sizes, targets = dataset.batch(indices)
        if optimizer is not None:
            optimizer.zero_grad()
            loss = loss_fn(model(images, sizes), targets)
            loss.backward()
            optimizer.step()
        else:
            with torch.no_grad():
                loss = loss_fn(model(images, sizes), targets)
        total += loss.detach().item() * len(indices)
        count += len(indices)
    return total / max(count, 1)


def train(cfg: TrainConfig, train_manifest, val_manifest=None,
          checkpoint_path=None) -> tuple[CameraParameterRegressor, TrainHistory]:
    """Train a regressor on a dataset manifest.

    Returns the trained model and the per-epoch loss / learning-rate history.
    Deterministic given ``cfg.seed`` up to framework kernel guarantees
    (single-threaded CPU runs are bit-stable in practice).
    """
    torch.manual_seed(cfg.seed)
    train_records = load_manifest(train_manifest)
    if not train_records:
        raise ValueError(f"empty training manifest: {train_manifest}")
    train_data = ManifestDataset(train_records)
    val_data = None
    if val_manifest is not None:
        val_records = load_manifest(val_manifest)
        if val_records:
            val_data = ManifestDataset(val_records)

    model = build_model(cfg)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.initial_lr)
    scheduler = torch.optim.lr_scheduler.MultiStepLR(
        optimizer, milestones=list(cfg.milestones), gamma=0.1)
    loss_fn = nn.MSELoss()

    history = TrainHistory()
    for epoch in range(cfg.epochs):
        history.learning_rates.append(optimizer.param_groups[0]["lr"])
        batches = resolution_batch_sampler(train_records, cfg.batch_size,
                                           cfg.seed, epoch)
        train_loss = _epoch_pass(model, train_data, batches, loss_fn, optimizer)
        if not torch.isfinite(torch.tensor(train_loss)):
            raise FloatingPointError(f"training loss diverged at epoch {epoch}")
        history.train_loss.append(train_loss)
        if val_data is not None:
            model.eval()
            val_batches = resolution_batch_sampler(val_data.records,
                                                   cfg.batch_size, cfg.seed, epoch)
            history.val_loss.append(
                _epoch_pass(model, val_data, val_batches, loss_fn))
            model.train()
        scheduler.step()

    model.eval()
    if checkpoint_path is not None:
        save_checkpoint(model, cfg, checkpoint_path)
    return model, history


def save_checkpoint(model: CameraParameterRegressor, cfg: TrainConfig, path) -> None:
    torch.save({
        "state_dict": model.state_dict(),
        "backbone_depth": cfg.backbone_depth,
        "use_size_features": cfg.use_size_features,
    }, path)


def load_checkpoint(path) -> CameraParameterRegressor:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = CameraParameterRegressor(
        depth=payload["backbone_depth"],
        use_size_features=payload.get("use_size_features", True))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
