"""Dataset manifests, target encoding and resolution-grouped batching.

The on-disk format is the camdist dataset layout: a ``manifest.json`` header
next to an ``annotations.jsonl`` record file, with image paths relative to
the manifest.  Records carry eight ground-truth fields (hfov_deg, cx, cy,
k1, k2, k3, p1, p2) plus bookkeeping.  Targets are trained in normalized
form: hfov_deg / 180, cx / width, cy / height, distortion coefficients raw.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

PARAMETER_FIELDS = ("hfov_deg", "cx", "cy", "k1", "k2", "k3", "p1", "p2")

HFOV_SCALE_DEG = 180.0

# Reference dimensions for the image-size features appended to the feature
# vector: width / W_REF and height / H_REF.
W_REF = 1920.0
H_REF = 1080.0


@dataclass(frozen=True)
class Record:
    """One annotated image."""

    id: str
    image_path: Path
    width_px: int
    height_px: int
    params: tuple[float, ...]  # the eight fields, in PARAMETER_FIELDS order

    @property
    def geometry(self) -> tuple[int, int]:
        return (self.width_px, self.height_px)


def load_manifest(manifest_path) -> list[Record]:
    """Read a camdist dataset manifest and its annotation records."""
    manifest_path = Path(manifest_path)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        header = json.load(fh)
    records = []
    with open(manifest_path.parent / header["annotations"], "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            records.append(Record(
                id=str(data["id"]),
                image_path=manifest_path.parent / data["image_path"],
                width_px=int(data["width_px"]),
                height_px=int(data["height_px"]),
                params=tuple(float(data[name]) for name in PARAMETER_FIELDS),
            ))
    return records


def encode_targets(record: Record) -> np.ndarray:
    hfov, cx, cy, k1, k2, k3, p1, p2 = record.params
    return np.array([
        hfov / HFOV_SCALE_DEG,
        cx / record.width_px,
        cy / record.height_px,
        k1, k2, k3, p1, p2,
    ], dtype=np.float64)


def decode_targets(encoded, width_px: int, height_px: int) -> dict:
    """Invert :func:`encode_targets` into named parameter fields."""
    e = np.asarray(encoded, dtype=np.float64).reshape(8)
    values = (e[0] * HFOV_SCALE_DEG, e[1] * width_px, e[2] * height_px,
              e[3], e[4], e[5], e[6], e[7])
    return {name: float(v) for name, v in zip(PARAMETER_FIELDS, values)}


def load_image_tensor(path) -> torch.Tensor:
    """PNG file to a float tensor in [0, 1], shape (3, H, W)."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def size_features(width_px: int, height_px: int) -> torch.Tensor:
    return torch.tensor([width_px / W_REF, height_px / H_REF], dtype=torch.float32)


def resolution_batch_sampler(records, batch_size: int, seed: int,
                             epoch: int = 0) -> list[list[int]]:
    """Batches of record indices, every batch a single image geometry.

    Indices are shuffled within each geometry group and the resulting batch
    order is shuffled too, all from a generator seeded by (seed, epoch), so
    epochs differ but remain reproducible.  Every index appears exactly once;
    trailing partial batches are kept.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    groups: dict[tuple[int, int], list[int]] = {}
    for i, rec in enumerate(records):
        groups.setdefault(rec.geometry, []).append(i)
    rng = np.random.default_rng([seed, epoch])
    batches: list[list[int]] = []
    for geometry in sorted(groups):
        idx = np.array(groups[geometry])
        rng.shuffle(idx)
        for start in range(0, len(idx), batch_size):
            batches.append([int(j) for j in idx[start:start + batch_size]])
    order = rng.permutation(len(batches))
    return [batches[int(i)] for i in order]


class ManifestDataset:
    """Materialized dataset: image tensors, size features and targets.

    Small toy datasets fit in memory; images are loaded once up front, which
    also keeps epoch timing flat.
    """

    def __init__(self, records):
        self.records = list(records)
        if not self.records:
            raise ValueError("dataset manifest holds no records")
        self.images = [load_image_tensor(r.image_path) for r in self.records]
        self.sizes = [size_features(r.width_px, r.height_px) for r in self.records]
        self.targets = [torch.from_numpy(encode_targets(r)).float()
                        for r in self.records]

    def __len__(self):
        return len(self.records)

    def batch(self, indices) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        images = torch.stack([self.images[i] for i in indices])
        sizes = torch.stack([self.sizes[i] for i in indices])
        targets = torch.stack([self.targets[i] for i in indices])
        return images, sizes, targets
