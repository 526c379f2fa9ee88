"""8-bit raster images and PNG / PGM / PPM file I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import ImageGeometry

_SUFFIXES = {".png", ".pgm", ".ppm"}


@dataclass
class RasterImage:
    """Row-major 8-bit image: shape (H, W) grayscale or (H, W, 3) RGB."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.ndim == 2:
            pass
        elif px.ndim == 3 and px.shape[2] == 3:
            pass
        else:
            raise ValueError(f"expected (H, W) or (H, W, 3) pixels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"empty image: shape {px.shape}")
        self.pixels = px

    @property
    def geometry(self) -> ImageGeometry:
        return ImageGeometry(width_px=self.pixels.shape[1], height_px=self.pixels.shape[0])

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())


def read_image(path) -> RasterImage:
    """Load an 8-bit gray or RGB image; palette images are expanded to RGB."""
    path = Path(path)
    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)
        elif im.mode in ("RGB", "P"):
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        else:
            raise ValueError(f"unsupported image mode {im.mode!r} in {path}; "
                             f"expected 8-bit grayscale or RGB")
    return RasterImage(arr)


def write_image(image: RasterImage, path) -> None:
    """Write as PNG, binary PGM or binary PPM according to the suffix."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in _SUFFIXES:
        raise ValueError(f"unsupported image suffix {suffix!r}; use .png, .pgm or .ppm")
    if suffix == ".pgm" and image.channels != 1:
        raise ValueError("PGM stores grayscale only; got an RGB image")
    if suffix == ".ppm" and image.channels != 3:
        raise ValueError("PPM stores RGB only; got a grayscale image")
    mode = "L" if image.channels == 1 else "RGB"
    Image.fromarray(image.pixels, mode=mode).save(path)
