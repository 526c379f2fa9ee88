"""Image warps that apply or remove lens distortion, and grid test patterns.

Both warps run by inverse mapping: for every destination pixel the source
location is computed, then sampled bilinearly.  Rendering a distorted image
therefore evaluates the iterative inverse of the distortion model, while
removing distortion uses the closed-form forward model.  Destination pixels
whose source falls outside the frame are filled black; for cameras produced
by the sampler the focal rescale guarantees none exist.

All per-pixel work is pure and vectorized, so results are independent of any
row-level parallelism a caller may add.
"""

from __future__ import annotations

import numpy as np

from .camera import (
    DEFAULT_UNDISTORT_MAX_ITER,
    DEFAULT_UNDISTORT_TOL,
    DistortionCoefficients,
    ImageGeometry,
    Intrinsics,
    _undistort_arrays,
    distort,
    normalized_to_pixel,
    pixel_to_normalized,
)
from .errors import NonConvergence
from .raster import RasterImage
from .sampler import FRAME_EPS


def _bilinear_sample(src: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample ``src`` at float positions; out-of-frame positions become 0.

    Positions within FRAME_EPS of the frame are treated as inside so that an
    identity map reproduces the input bit-exactly despite float noise.
    """
    height, width = src.shape[:2]
    inside = ((u >= -FRAME_EPS) & (u <= width - 1 + FRAME_EPS)
              & (v >= -FRAME_EPS) & (v <= height - 1 + FRAME_EPS))
    uc = np.clip(u, 0.0, float(width - 1))
    vc = np.clip(v, 0.0, float(height - 1))
    x0 = np.floor(uc).astype(np.intp)
    y0 = np.floor(vc).astype(np.intp)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    wx = uc - x0
    wy = vc - y0
    if src.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    vals = (src[y0, x0] * (1.0 - wx) * (1.0 - wy)
            + src[y0, x1] * wx * (1.0 - wy)
            + src[y1, x0] * (1.0 - wx) * wy
            + src[y1, x1] * wx * wy)
    mask = inside if src.ndim == 2 else inside[..., None]
    return np.where(mask, vals, 0.0)


def _dest_grid(geometry: ImageGeometry) -> tuple[np.ndarray, np.ndarray]:
    u, v = np.meshgrid(np.arange(geometry.width_px, dtype=np.float64),
                       np.arange(geometry.height_px, dtype=np.float64))
    return u, v


def _render(src: RasterImage, map_u: np.ndarray, map_v: np.ndarray) -> RasterImage:
    sampled = _bilinear_sample(src.pixels.astype(np.float64), map_u, map_v)
    return RasterImage(np.rint(sampled).clip(0, 255).astype(np.uint8))


def apply_distortion_to_image(src: RasterImage, intr: Intrinsics,
                              coeffs: DistortionCoefficients,
                              focal_scale: float = 1.0, *,
                              tol: float = DEFAULT_UNDISTORT_TOL,
                              max_iter: int = DEFAULT_UNDISTORT_MAX_ITER) -> RasterImage:
    """Render the distorted view of an undistorted source image.

    ``intr`` is the camera of the distorted output.  When ``focal_scale`` is
    given, the source image is taken to have been captured at the unscaled
    focal (fx / focal_scale), which is how the sampler's rescale removes
    black borders: the output camera zooms while the source keeps its frame.
    With the default scale of 1 one camera describes both sides.
    """
    if intr.geometry != src.geometry:
        raise ValueError(f"intrinsics geometry {intr.geometry} does not match "
                         f"source image {src.geometry}")
    if focal_scale <= 0:
        raise ValueError(f"focal_scale must be positive, got {focal_scale}")
    u, v = _dest_grid(src.geometry)
    x, y = pixel_to_normalized(u, v, intr)
    xi, yi, ok, iterations = _undistort_arrays(x, y, coeffs, tol, max_iter)
    if not ok.all():
        bad = np.argwhere(~ok)[0]
        raise NonConvergence(
            f"inverse distortion did not converge at destination pixel "
            f"(u={bad[1]}, v={bad[0]}) after {iterations} iterations",
            iterations=iterations)
    source_intr = intr.with_focal_scaled(1.0 / focal_scale)
    su, sv = normalized_to_pixel(xi, yi, source_intr)
    return _render(src, su, sv)


def undistort_image(src: RasterImage, intr: Intrinsics,
                    coeffs: DistortionCoefficients) -> RasterImage:
    """Remove lens distortion from an image.

    The inverse map of this warp is the closed-form forward distortion: each
    ideal destination pixel samples the distorted source where the model says
    its content landed.
    """
    if intr.geometry != src.geometry:
        raise ValueError(f"intrinsics geometry {intr.geometry} does not match "
                         f"source image {src.geometry}")
    u, v = _dest_grid(src.geometry)
    x, y = pixel_to_normalized(u, v, intr)
    xd, yd = distort(x, y, coeffs)
    su, sv = normalized_to_pixel(xd, yd, intr)
    return _render(src, su, sv)


def count_black_filled(image: RasterImage) -> int:
    """Number of exactly-zero pixels (all channels zero for RGB)."""
    px = image.pixels
    if px.ndim == 3:
        return int(np.count_nonzero((px == 0).all(axis=2)))
    return int(np.count_nonzero(px == 0))


def _line_pixel_sets(extent: int, spacing: int, width: int) -> np.ndarray:
    """Boolean mask of the rows (or columns) covered by grid lines.

    Line centers sit at (extent - 1) / 2 + k * spacing, so the pattern is
    mirror-symmetric about the pixel grid; a line of width w covers the
    integer positions in [center - w/2, center + w/2).  For odd widths the
    half-integer centers of even extents round one side, which breaks exact
    mirror symmetry; even widths are exactly symmetric.
    """
    mask = np.zeros(extent, dtype=bool)
    center = (extent - 1) / 2.0
    k_max = int(np.ceil((center + width) / spacing)) + 1
    for k in range(-k_max, k_max + 1):
        c = center + k * spacing
        start = int(np.ceil(c - width / 2.0))
        stop = int(np.ceil(c + width / 2.0))
        start = max(start, 0)
        stop = min(stop, extent)
        if start < stop:
            mask[start:stop] = True
    return mask


def generate_grid_image(geometry: ImageGeometry, spacing_px: int,
                        line_width_px: int) -> RasterImage:
    """White background with black horizontal and vertical lines.

    Lines repeat every ``spacing_px`` and the pattern is centered on the
    image, so partial lines may appear at the frame edges.
    """
    if spacing_px <= line_width_px:
        raise ValueError(f"spacing_px ({spacing_px}) must exceed line_width_px "
                         f"({line_width_px})")
    if line_width_px < 1:
        raise ValueError(f"line_width_px must be >= 1, got {line_width_px}")
    rows = _line_pixel_sets(geometry.height_px, spacing_px, line_width_px)
    cols = _line_pixel_sets(geometry.width_px, spacing_px, line_width_px)
    img = np.full((geometry.height_px, geometry.width_px), 255, dtype=np.uint8)
    img[rows, :] = 0
    img[:, cols] = 0
    return RasterImage(img)
