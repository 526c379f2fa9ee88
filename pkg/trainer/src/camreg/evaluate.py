"""Robustness evaluation and predictions-file emission."""

from __future__ import annotations

import json

import torch
from torch import nn

from .data import (
    ManifestDataset,
    PARAMETER_FIELDS,
    decode_targets,
    load_manifest,
    resolution_batch_sampler,
)
from .transforms import ROBUSTNESS_TRANSFORMS


def _format_mse(value: float) -> str:
    return f"{value * 1e3:.2f}e-03"


def evaluate_robustness(model, test_manifest, *, batch_size: int = 64,
                        seed: int = 0) -> list[tuple[str, float]]:
    """MSE per corruption, the untransformed column first.

    Deterministic: transform randomness is derived from ``seed`` alone, so
    identical model and data give an identical table.
    """
    records = load_manifest(test_manifest)
    dataset = ManifestDataset(records)
    batches = resolution_batch_sampler(records, batch_size, seed, 0)
    loss_fn = nn.MSELoss(reduction="sum")
    rows = []
    model.eval()
    with torch.no_grad():
        for name, transform in ROBUSTNESS_TRANSFORMS:
            total = 0.0
            for indices in batches:
                images, sizes, targets = dataset.batch(indices)
                if transform is not None:
                    images = transform(images, seed=seed)
                total += float(loss_fn(model(images, sizes), targets))
            rows.append((name, total / (len(dataset) * len(PARAMETER_FIELDS))))
    return rows


def render_robustness_row(model_name: str, rows) -> str:
    """One table line: model name followed by the per-transform MSE cells."""
    cells = " & ".join(_format_mse(value) for _, value in rows)
    return f"{model_name} & {cells}"


def predict(model, manifest, out_path, *, batch_size: int = 64) -> int:
    """Write a predictions file consumable by the camdist eval command.

    Each line holds the record id, its geometry, the ground-truth parameters
    and the model's decoded prediction.  Returns the record count.
    """
    records = load_manifest(manifest)
    dataset = ManifestDataset(records)
    lines = []
    model.eval()
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            indices = range(start, min(start + batch_size, len(records)))
            images, sizes, _ = dataset.batch(indices)
            outputs = model(images, sizes).double().numpy()
            for row, i in zip(outputs, indices):
                rec = records[i]
                lines.append(json.dumps({
                    "id": rec.id,
                    "width": rec.width_px,
                    "height": rec.height_px,
                    "true": dict(zip(PARAMETER_FIELDS, rec.params)),
                    "pred": decode_targets(row, rec.width_px, rec.height_px),
                }))
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))
    return len(lines)
