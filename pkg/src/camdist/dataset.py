"""Synthetic dataset generation, annotation schema and target encoding.

A dataset directory holds ``images/NNNNNN.png``, an ``annotations.jsonl``
record file and a ``manifest.json`` header carrying the sampler
configuration, seed and source list, so any dataset can be regenerated
bit-for-bit from its manifest.  All paths inside the files are relative to
the manifest location.

Training targets are packed into a normalized 8-vector: the FOV divided by
180, the principal point divided by the image dimensions, and the five
distortion coefficients raw (the sampler already bounds them to order-one
magnitudes).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .camera import ImageGeometry
from .errormap import PARAMETER_FIELDS, CameraParameterVector
from .raster import RasterImage, read_image, write_image
from .sampler import SamplerConfig, SampledCamera, rng_for_index, sample_camera
from .warp import apply_distortion_to_image

HFOV_SCALE_DEG = 180.0

_RECORD_FIELDS = (
    "id", "image_path", "width_px", "height_px",
    "hfov_deg", "cx", "cy", "k1", "k2", "k3", "p1", "p2",
    "focal_scale", "source_image", "seed_index",
)

MANIFEST_SCHEMA = "camdist-dataset/1"


@dataclass(frozen=True)
class AnnotationRecord:
    """Ground truth for one generated image."""

    id: str
    image_path: str
    width_px: int
    height_px: int
    hfov_deg: float
    cx: float
    cy: float
    k1: float
    k2: float
    k3: float
    p1: float
    p2: float
    focal_scale: float
    source_image: str
    seed_index: int

    def parameter_vector(self) -> CameraParameterVector:
        return CameraParameterVector(**{name: getattr(self, name)
                                        for name in PARAMETER_FIELDS})

    @property
    def geometry(self) -> ImageGeometry:
        return ImageGeometry(self.width_px, self.height_px)

    def to_json_dict(self) -> dict:
        return {name: getattr(self, name) for name in _RECORD_FIELDS}

    @classmethod
    def from_json_dict(cls, data: dict) -> "AnnotationRecord":
        return cls(**{name: data[name] for name in _RECORD_FIELDS})


def record_from_camera(cam: SampledCamera, *, id: str, image_path: str,
                       source_image: str, seed_index: int) -> AnnotationRecord:
    geom = cam.intrinsics.geometry
    c = cam.coefficients
    return AnnotationRecord(
        id=id, image_path=image_path,
        width_px=geom.width_px, height_px=geom.height_px,
        hfov_deg=cam.hfov_deg, cx=cam.intrinsics.cx, cy=cam.intrinsics.cy,
        k1=c.k1, k2=c.k2, k3=c.k3, p1=c.p1, p2=c.p2,
        focal_scale=cam.focal_scale,
        source_image=source_image, seed_index=seed_index,
    )


def encode_targets(rec: AnnotationRecord) -> np.ndarray:
    """Normalized 8-vector in the order hfov, cx, cy, k1, k2, k3, p1, p2."""
    return np.array([
        rec.hfov_deg / HFOV_SCALE_DEG,
        rec.cx / rec.width_px,
        rec.cy / rec.height_px,
        rec.k1, rec.k2, rec.k3, rec.p1, rec.p2,
    ], dtype=np.float64)


def decode_targets(encoded, geometry: ImageGeometry) -> CameraParameterVector:
    """Invert :func:`encode_targets`; round-trips to 1e-12 relative."""
    e = np.asarray(encoded, dtype=np.float64)
    if e.shape != (8,):
        raise ValueError(f"expected an 8-vector, got shape {e.shape}")
    return CameraParameterVector(
        hfov_deg=float(e[0]) * HFOV_SCALE_DEG,
        cx=float(e[1]) * geometry.width_px,
        cy=float(e[2]) * geometry.height_px,
        k1=float(e[3]), k2=float(e[4]), k3=float(e[5]),
        p1=float(e[6]), p2=float(e[7]),
    )


@dataclass
class DatasetManifest:
    """Dataset header plus its annotation records.

    ``base_dir`` is the directory record paths are currently relative to;
    saving into a different directory rewrites them so a manifest's paths
    always resolve against its own location.
    """

    geometry: ImageGeometry
    sampler_config: SamplerConfig
    sources: list[str]
    records: list[AnnotationRecord]
    annotations_file: str = "annotations.jsonl"
    base_dir: Path | None = None

    def header_dict(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA,
            "geometry": {"width_px": self.geometry.width_px,
                         "height_px": self.geometry.height_px},
            "sampler_config": self.sampler_config.to_dict(),
            "sources": list(self.sources),
            "annotations": self.annotations_file,
            "count": len(self.records),
        }

    def _records_relative_to(self, new_dir: Path) -> list[AnnotationRecord]:
        if self.base_dir is None or Path(self.base_dir).resolve() == new_dir.resolve():
            return self.records
        out = []
        for rec in self.records:
            rel = os.path.relpath(Path(self.base_dir) / rec.image_path, new_dir)
            out.append(replace(rec, image_path=rel.replace(os.sep, "/")))
        return out

    def save(self, manifest_path) -> None:
        """Write the manifest header and its annotations file."""
        manifest_path = Path(manifest_path)
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        records = self._records_relative_to(manifest_path.parent)
        ann_path = manifest_path.parent / self.annotations_file
        with open(ann_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json_dict()) + "\n")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(self.header_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, manifest_path) -> "DatasetManifest":
        manifest_path = Path(manifest_path)
        with open(manifest_path, "r", encoding="utf-8") as fh:
            header = json.load(fh)
        if header.get("schema") != MANIFEST_SCHEMA:
            raise ValueError(f"unrecognized manifest schema {header.get('schema')!r}")
        geometry = ImageGeometry(header["geometry"]["width_px"],
                                 header["geometry"]["height_px"])
        records = []
        ann_file = header["annotations"]
        with open(manifest_path.parent / ann_file, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(AnnotationRecord.from_json_dict(json.loads(line)))
        return cls(
            geometry=geometry,
            sampler_config=SamplerConfig.from_dict(header["sampler_config"]),
            sources=list(header["sources"]),
            records=records,
            annotations_file=ann_file,
            base_dir=manifest_path.parent,
        )


_SOURCE_SUFFIXES = (".png", ".pgm", ".ppm")


def _list_sources(source_dir: Path) -> list[str]:
    names = sorted(p.name for p in source_dir.iterdir()
                   if p.suffix.lower() in _SOURCE_SUFFIXES)
    if not names:
        raise ValueError(f"no source images (*.png, *.pgm, *.ppm) in {source_dir}")
    return names


def generate_dataset(source_dir, geometry: ImageGeometry, n_images: int,
                     cfg: SamplerConfig, out_dir, *, threads: int = 1) -> DatasetManifest:
    """Sample cameras, warp source images and write a dataset directory.

    Source images are consumed round-robin in sorted name order.  Image index
    ``i`` uses the RNG stream ``rng_for_index(cfg.seed, i)``, so output is
    reproducible and independent of ``threads``.
    """
    source_dir = Path(source_dir)
    out_dir = Path(out_dir)
    if n_images < 0:
        raise ValueError(f"n_images must be >= 0, got {n_images}")
    sources = _list_sources(source_dir) if n_images > 0 else []
    used = sources[:n_images] if n_images < len(sources) else sources
    loaded: dict[str, RasterImage] = {}
    for name in used:
        img = read_image(source_dir / name)
        if img.geometry != geometry:
            raise ValueError(f"source image {name} is {img.geometry}, "
                             f"expected {geometry}")
        loaded[name] = img

    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    def build(index: int) -> AnnotationRecord:
        source_name = sources[index % len(sources)]
        cam = sample_camera(geometry, cfg, rng_for_index(cfg.seed, index))
        warped = apply_distortion_to_image(loaded[source_name], cam.intrinsics,
                                           cam.coefficients, cam.focal_scale)
        rel_path = f"images/{index:06d}.png"
        write_image(warped, out_dir / rel_path)
        return record_from_camera(cam, id=f"{index:06d}", image_path=rel_path,
                                  source_image=source_name, seed_index=index)

    if n_images == 0:
        records: list[AnnotationRecord] = []
    elif threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(build, range(n_images)))
    else:
        records = [build(i) for i in range(n_images)]

    manifest = DatasetManifest(geometry=geometry, sampler_config=cfg,
                               sources=sources, records=records,
                               base_dir=out_dir)
    manifest.save(out_dir / "manifest.json")
    return manifest


def split_dataset(manifest: DatasetManifest,
                  seed: int) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Disjoint, exhaustive 70 / 15 / 15 partition via a seeded shuffle.

    Sizes are floor(0.7 n) and floor(0.15 n) with the remainder in the test
    split.  Records keep their original order inside each split.
    """
    n = len(manifest.records)
    if n == 0:
        raise ValueError("cannot split an empty manifest")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(0.7 * n)
    n_val = int(0.15 * n)
    groups = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    names = ("train", "val", "test")
    out = []
    for name, idx in zip(names, groups):
        records = [manifest.records[i] for i in sorted(int(j) for j in idx)]
        out.append(DatasetManifest(
            geometry=manifest.geometry,
            sampler_config=manifest.sampler_config,
            sources=manifest.sources,
            records=records,
            annotations_file=f"{name}.jsonl",
            base_dir=manifest.base_dir,
        ))
    return tuple(out)
