"""Pinhole projection and the Brown-Conrady distortion model.

All distortion math runs in normalized coordinates: pixel coordinates are
translated by the principal point and divided by the focal length before any
coefficient is applied, which keeps coefficients independent of image
resolution.  Points are represented as plain ``(x, y)`` pairs; every function
here accepts either Python floats or equally shaped numpy arrays and returns
the same kind, so the scalar sampling paths and the vectorized warping paths
share one implementation.

The forward model maps ideal normalized coordinates ``(x, y)`` with
``r^2 = x^2 + y^2`` to distorted ones:

    x_d = x * (1 + k1 r^2 + k2 r^4 + k3 r^6) + 2 p1 x y + p2 (r^2 + 2 x^2)
    y_d = y * (1 + k1 r^2 + k2 r^4 + k3 r^6) + p1 (r^2 + 2 y^2) + 2 p2 x y

The inverse has no closed form and is solved by damped fixed-point iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence

DEFAULT_UNDISTORT_TOL = 1e-10
DEFAULT_UNDISTORT_MAX_ITER = 50


@dataclass(frozen=True)
class ImageGeometry:
    """Integer pixel dimensions of an image."""

    width_px: int
    height_px: int

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError(f"image dimensions must be >= 1, got "
                             f"{self.width_px}x{self.height_px}")

    @property
    def center(self) -> tuple[float, float]:
        """Geometric image center (W/2, H/2) in pixel units."""
        return self.width_px / 2.0, self.height_px / 2.0

    def __str__(self) -> str:
        return f"{self.width_px}x{self.height_px}"


@dataclass(frozen=True)
class DistortionCoefficients:
    """The five Brown-Conrady coefficients: radial k1..k3, tangential p1, p2."""

    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "p1", "p2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"coefficient {name} must be finite")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.k1, self.k2, self.k3, self.p1, self.p2)

    @property
    def is_zero(self) -> bool:
        return self.as_tuple() == (0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole parameters bound to an image geometry.

    ``skew`` is carried for completeness but is zero throughout the toolkit;
    the sampler never produces skewed cameras.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    geometry: ImageGeometry
    skew: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        for name in ("fx", "fy", "cx", "cy", "skew"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"intrinsic {name} must be finite")

    def with_focal_scaled(self, scale: float) -> "Intrinsics":
        """Return a copy with fx and fy multiplied by ``scale``."""
        return Intrinsics(self.fx * scale, self.fy * scale, self.cx, self.cy,
                          self.geometry, self.skew)

    def with_principal_point(self, cx: float, cy: float) -> "Intrinsics":
        return Intrinsics(self.fx, self.fy, cx, cy, self.geometry, self.skew)


def hfov_to_fx(hfov_deg: float, width_px: int) -> float:
    """Focal length in pixels for a horizontal field of view.

    fx = (W / 2) / tan(hfov / 2).  Raises ValueError outside (0, 180) degrees.
    """
    if not 0.0 < hfov_deg < 180.0:
        raise ValueError(f"horizontal FOV must be in (0, 180) degrees, got {hfov_deg}")
    return (width_px / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)


def fx_to_hfov(fx: float, width_px: int) -> float:
    """Inverse of :func:`hfov_to_fx`; round-trips to 1e-12 relative."""
    if fx <= 0:
        raise ValueError(f"focal length must be positive, got {fx}")
    return math.degrees(2.0 * math.atan((width_px / 2.0) / fx))


def intrinsics_from_hfov(hfov_deg: float, geometry: ImageGeometry) -> Intrinsics:
    """Centered square-pixel intrinsics for a horizontal FOV (fy = fx)."""
    fx = hfov_to_fx(hfov_deg, geometry.width_px)
    cx, cy = geometry.center
    return Intrinsics(fx=fx, fy=fx, cx=cx, cy=cy, geometry=geometry)


def pixel_to_normalized(u, v, intr: Intrinsics):
    """Map pixel coordinates to normalized camera-plane coordinates."""
    y = (v - intr.cy) / intr.fy
    x = (u - intr.cx - intr.skew * y) / intr.fx
    return x, y


def normalized_to_pixel(x, y, intr: Intrinsics):
    """Map normalized coordinates back to pixel coordinates."""
    u = intr.fx * x + intr.skew * y + intr.cx
    v = intr.fy * y + intr.cy
    return u, v


def distort(x, y, coeffs: DistortionCoefficients):
    """Apply the forward Brown-Conrady model to normalized coordinates."""
    k1, k2, k3, p1, p2 = coeffs.as_tuple()
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return xd, yd


def _undistort_arrays(xd, yd, coeffs: DistortionCoefficients,
                      tol: float, max_iter: int):
    """Vectorized inverse distortion.

    Damped fixed-point iteration x <- (x_d - tangential(x)) / radial(x),
    seeded at the distorted point, switching to Newton steps once near the
    solution (the contract is only the forward-residual bound, so the solver
    is free to accelerate).  Returns ``(x, y, converged, iterations)`` where
    ``converged`` marks points whose forward-mapped residual is within
    ``tol`` (max-norm, normalized units).  Does not raise.
    """
    k1, k2, k3, p1, p2 = coeffs.as_tuple()
    xd = np.asarray(xd, dtype=np.float64)
    yd = np.asarray(yd, dtype=np.float64)
    x = xd.copy()
    y = yd.copy()
    converged = np.zeros(xd.shape, dtype=bool)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        # fx, fy are the forward-mapped residuals; checking them up front
        # keeps the zero-coefficient identity exact (no update is ever taken).
        fx = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x) - xd
        fy = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y - yd
        residual = np.maximum(np.abs(fx), np.abs(fy))
        # radial > 0 pins the physical branch: the cubic radial polynomial can
        # have sign-flipped algebraic preimages that no lens realizes.
        converged = np.isfinite(residual) & (residual <= tol) & (radial > 0.0)
        if converged.all():
            break
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if iterations <= 2:
                # Fixed-point warmup: x - f/radial equals the damped update
                # (x_d - tangential(x)) / radial(x); robust far from the root.
                x = x - fx / radial
                y = y - fy / radial
            else:
                dr = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2)
                j11 = radial + 2.0 * x * x * dr + 2.0 * p1 * y + 6.0 * p2 * x
                j22 = radial + 2.0 * y * y * dr + 6.0 * p1 * y + 2.0 * p2 * x
                j12 = 2.0 * x * y * dr + 2.0 * p1 * x + 2.0 * p2 * y
                det = j11 * j22 - j12 * j12
                x = x - (j22 * fx - j12 * fy) / det
                y = y - (j11 * fy - j12 * fx) / det
    return x, y, converged, iterations


def undistort(xd, yd, coeffs: DistortionCoefficients,
              tol: float = DEFAULT_UNDISTORT_TOL,
              max_iter: int = DEFAULT_UNDISTORT_MAX_ITER):
    """Invert the Brown-Conrady model at one or many distorted points.

    Returns normalized coordinates whose forward distortion reproduces the
    input within ``tol`` (max-norm).  Raises :class:`NonConvergence` after
    ``max_iter`` iterations, reporting the worst residual and last iterate.
    Deterministic for given inputs.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    scalar = np.isscalar(xd) or (np.ndim(xd) == 0 and np.ndim(yd) == 0)
    x, y, ok, iterations = _undistort_arrays(xd, yd, coeffs, tol, max_iter)
    if not ok.all():
        fx_, fy_ = distort(x, y, coeffs)
        residual = np.maximum(np.abs(fx_ - np.asarray(xd, dtype=np.float64)),
                              np.abs(fy_ - np.asarray(yd, dtype=np.float64)))
        residual = np.where(np.isfinite(residual), residual, np.inf)
        worst = int(np.argmax(residual))
        raise NonConvergence(
            f"inverse distortion did not reach tol={tol} after {iterations} "
            f"iterations (worst residual {residual.flat[worst]:.3e})",
            last_iterate=(x.flat[worst], y.flat[worst]),
            residual=float(residual.flat[worst]),
            iterations=iterations,
        )
    if scalar:
        return float(x), float(y)
    return x, y
