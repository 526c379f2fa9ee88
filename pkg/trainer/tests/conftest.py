import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from camreg.data import PARAMETER_FIELDS


def run_camdist(*args: str) -> subprocess.CompletedProcess:
    """Invoke the primary toolkit through its CLI surface."""
    return subprocess.run([sys.executable, "-m", "camdist.cli", *args],
                          capture_output=True, text=True)


def write_toy_manifest(root: Path, geometries, *, name="manifest.json",
                       seed=0) -> Path:
    """Synthesize a tiny dataset directory in the documented layout.

    ``geometries`` maps (width, height) to an image count; images are seeded
    noise PNGs so the files are real but no primary-toolkit code runs.
    """
    root.mkdir(parents=True, exist_ok=True)
    (root / "images").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    index = 0
    for (width, height), count in geometries.items():
        for _ in range(count):
            rel = f"images/{index:06d}.png"
            arr = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
            Image.fromarray(arr, mode="L").save(root / rel)
            params = {
                "hfov_deg": float(rng.uniform(40, 140)),
                "cx": width / 2.0 + float(rng.uniform(-1, 1)),
                "cy": height / 2.0 + float(rng.uniform(-1, 1)),
                "k1": float(rng.uniform(-0.05, 0.05)),
                "k2": 0.0, "k3": 0.0,
                "p1": float(rng.uniform(-0.005, 0.005)), "p2": 0.0,
            }
            records.append({
                "id": f"{index:06d}", "image_path": rel,
                "width_px": width, "height_px": height,
                **{k: params[k] for k in PARAMETER_FIELDS},
                "focal_scale": 1.0, "source_image": "toy",
                "seed_index": index,
            })
            index += 1
    with open(root / "annotations.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    header = {
        "schema": "camdist-dataset/1",
        "geometry": {"width_px": next(iter(geometries))[0],
                     "height_px": next(iter(geometries))[1]},
        "sampler_config": {}, "sources": ["toy"],
        "annotations": "annotations.jsonl", "count": len(records),
    }
    with open(root / name, "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
    return root / name


@pytest.fixture(scope="session")
def toy_manifest(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("toy_ds")
    return write_toy_manifest(root, {(32, 32): 24})


@pytest.fixture(scope="session")
def mixed_resolution_manifest(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("mixed_ds")
    return write_toy_manifest(root, {(16, 8): 11, (12, 6): 9})
