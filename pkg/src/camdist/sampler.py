"""Adaptive sampling of distortion coefficients under a displacement budget.

Coefficient magnitudes are bounded through a single reference point, the
top-left pixel of the image, where distortion is near its strongest.  For
each coefficient in a random order, bisection finds the interval of values
that keep the reference-pixel displacement inside the configured budget
(holding previously drawn coefficients fixed), and the value is drawn
uniformly from that interval.  The principal point is then shifted and the
focal length rescaled so the distorted render contains no out-of-frame
(black) samples.

Reproducibility: every consumer derives one RNG stream per image index via
:func:`rng_for_index`, so datasets are identical across platforms, runs and
parallelism degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .camera import (
    DistortionCoefficients,
    ImageGeometry,
    Intrinsics,
    _undistort_arrays,
    distort,
    fx_to_hfov,
    intrinsics_from_hfov,
    normalized_to_pixel,
    pixel_to_normalized,
)
from .errors import BudgetExhausted, ConfigError, NonConvergence

COEFFICIENT_NAMES = ("k1", "k2", "k3", "p1", "p2")

DEFAULT_SEARCH_LIMITS = (2.0, 5.0, 10.0, 0.5, 0.5)

# How many times a search limit may be doubled before the endpoint saturates.
SEARCH_LIMIT_EXPANSIONS = 4

# Slack applied when testing whether a source sample lies inside the frame,
# to absorb floating-point noise of the normalize/denormalize round trip.
FRAME_EPS = 1e-9

_CONFIG_KEYS = (
    "max_displacement_px",
    "hfov_choices_deg",
    "principal_shift_max_px",
    "seed",
    "bisection_tol",
    "bisection_max_iter",
)


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the coefficient sampler.

    ``principal_shift_max_px`` may be a single value used for both axes or an
    (x, y) pair.  ``search_limits`` are the per-coefficient starting brackets
    for the bisection, ordered k1, k2, k3, p1, p2.
    """

    max_displacement_px: float = 50.0
    hfov_choices_deg: tuple[float, ...] = tuple(float(d) for d in range(30, 151, 10))
    principal_shift_max_px: float | tuple[float, float] = 0.0
    seed: int = 0
    bisection_tol: float = 1e-3
    bisection_max_iter: int = 100
    search_limits: tuple[float, float, float, float, float] = DEFAULT_SEARCH_LIMITS

    def __post_init__(self):
        if self.max_displacement_px < 0 or not math.isfinite(self.max_displacement_px):
            raise ConfigError(f"max_displacement_px must be >= 0, got {self.max_displacement_px}")
        if not self.hfov_choices_deg:
            raise ConfigError("hfov_choices_deg must not be empty")
        for h in self.hfov_choices_deg:
            if not 0.0 < h < 180.0:
                raise ConfigError(f"hfov choice {h} outside (0, 180) degrees")
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")
        if self.bisection_tol <= 0:
            raise ConfigError(f"bisection_tol must be positive, got {self.bisection_tol}")
        if self.bisection_max_iter < 1:
            raise ConfigError(f"bisection_max_iter must be >= 1, got {self.bisection_max_iter}")
        sx, sy = self.principal_shift()
        if sx < 0 or sy < 0:
            raise ConfigError("principal_shift_max_px must be non-negative")
        if len(self.search_limits) != len(COEFFICIENT_NAMES):
            raise ConfigError("search_limits must provide one bound per coefficient")
        for lim in self.search_limits:
            if lim <= 0:
                raise ConfigError(f"search limits must be positive, got {lim}")

    def principal_shift(self) -> tuple[float, float]:
        s = self.principal_shift_max_px
        if isinstance(s, tuple):
            return float(s[0]), float(s[1])
        return float(s), float(s)

    def search_limit(self, name: str) -> float:
        return self.search_limits[COEFFICIENT_NAMES.index(name)]

    def validate_for_geometry(self, geometry: ImageGeometry) -> None:
        half_min = min(geometry.width_px, geometry.height_px) / 2.0
        if self.max_displacement_px >= half_min:
            raise ConfigError(
                f"max_displacement_px={self.max_displacement_px} must be below "
                f"min(width, height)/2 = {half_min} for geometry {geometry}")

    @classmethod
    def default_for(cls, geometry: ImageGeometry, **overrides) -> "SamplerConfig":
        """Defaults with the principal shift set to 4% of each dimension."""
        shift = (0.04 * geometry.width_px, 0.04 * geometry.height_px)
        return cls(principal_shift_max_px=shift, **overrides)

    def to_dict(self) -> dict:
        sx, sy = self.principal_shift()
        return {
            "max_displacement_px": self.max_displacement_px,
            "hfov_choices_deg": list(self.hfov_choices_deg),
            "principal_shift_max_px": [sx, sy],
            "seed": self.seed,
            "bisection_tol": self.bisection_tol,
            "bisection_max_iter": self.bisection_max_iter,
            "search_limits": list(self.search_limits),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SamplerConfig":
        kwargs = dict(data)
        if "hfov_choices_deg" in kwargs:
            kwargs["hfov_choices_deg"] = tuple(kwargs["hfov_choices_deg"])
        if "principal_shift_max_px" in kwargs:
            s = kwargs["principal_shift_max_px"]
            if isinstance(s, (list, tuple)):
                kwargs["principal_shift_max_px"] = (float(s[0]), float(s[1]))
        if "search_limits" in kwargs:
            kwargs["search_limits"] = tuple(kwargs["search_limits"])
        return cls(**kwargs)


def parse_config(text: str) -> SamplerConfig:
    """Parse a plain-text ``key = value`` sampler configuration.

    Blank lines and ``#`` comments are ignored.  Unknown keys are rejected.
    ``hfov_choices_deg`` takes a comma-separated list; ``principal_shift_max_px``
    takes one value or an ``x, y`` pair.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key == "hfov_choices_deg":
                values[key] = tuple(float(v) for v in value.split(","))
            elif key == "principal_shift_max_px":
                parts = [float(v) for v in value.split(",")]
                values[key] = parts[0] if len(parts) == 1 else (parts[0], parts[1])
            elif key in ("seed", "bisection_max_iter"):
                values[key] = int(value)
            else:
                values[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return SamplerConfig(**values)


def load_config(path) -> SamplerConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


@dataclass(frozen=True)
class BoundInterval:
    """Admissible range [lower, upper] for one coefficient; always contains 0."""

    lower: float
    upper: float
    iterations_lower: int
    iterations_upper: int


@dataclass(frozen=True)
class SampledCamera:
    """One drawn camera: final intrinsics plus its distortion coefficients.

    ``intrinsics`` carry the principal-point shift and the focal rescale;
    ``hfov_deg`` is the effective horizontal FOV of those final intrinsics.
    The pre-shift, pre-scale base camera is recoverable as
    ``fx / focal_scale`` with a centered principal point.
    """

    intrinsics: Intrinsics
    coefficients: DistortionCoefficients
    hfov_deg: float
    focal_scale: float
    draw_order: tuple[str, ...]


def rng_for_index(seed: int, index: int) -> np.random.Generator:
    """Independent, platform-stable RNG stream for one image index.

    The stream-splitting rule is ``default_rng([seed, index])``: the pair
    seeds a SeedSequence, so streams for different indices never overlap and
    generation order cannot matter.
    """
    return np.random.default_rng([int(seed), int(index)])


def _displacement_raw(x0: float, y0: float, intr: Intrinsics,
                      k1: float, k2: float, k3: float, p1: float, p2: float) -> float:
    # Scalar fast path used inside bisection loops; (x0, y0) is the reference
    # pixel in normalized coordinates.
    r2 = x0 * x0 + y0 * y0
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x0 * radial + 2.0 * p1 * x0 * y0 + p2 * (r2 + 2.0 * x0 * x0)
    yd = y0 * radial + p1 * (r2 + 2.0 * y0 * y0) + 2.0 * p2 * x0 * y0
    du = intr.fx * (xd - x0) + intr.skew * (yd - y0)
    dv = intr.fy * (yd - y0)
    return math.hypot(du, dv)


def poi_displacement(coeffs: DistortionCoefficients, intr: Intrinsics) -> float:
    """Pixel displacement of the top-left pixel under the forward distortion.

    The top-left pixel (0, 0) is normalized, distorted and mapped back to
    pixels; the return value is the Euclidean distance it moved.  Zero when
    all coefficients are zero.
    """
    x0, y0 = pixel_to_normalized(0.0, 0.0, intr)
    return _displacement_raw(x0, y0, intr, *coeffs.as_tuple())


def _bisect_endpoint(h, limit: float, budget: float, tol: float,
                     max_iter: int) -> tuple[float, int]:
    """One signed endpoint of the admissible interval.

    ``h`` maps a coefficient value to the reference displacement.  The
    displacement is convex in each coefficient (the distorted point is affine
    in it), so on each side of zero there is a single crossing of the budget.
    Returns (endpoint, bisection iterations); saturates at the expanded search
    limit when even that stays inside the budget.
    """
    lim = limit
    expansions = 0
    while h(lim) < budget and expansions < SEARCH_LIMIT_EXPANSIONS:
        lim *= 2.0
        expansions += 1
    if h(lim) < budget:
        # Even the expanded search limit stays inside the budget.
        return lim, 0
    lo, hi = 0.0, lim
    iters = 0
    mid = 0.0
    while iters < max_iter:
        mid = 0.5 * (lo + hi)
        iters += 1
        d = h(mid)
        if abs(d - budget) <= tol:
            return mid, iters
        if d > budget:
            hi = mid
        else:
            lo = mid
    # Iteration cap hit before the tolerance; the caller verifies the result
    # against the forward model and rejects it if the budget is broken.
    return mid, iters


def bound_coefficient(name: str, fixed: DistortionCoefficients,
                      intr: Intrinsics, cfg: SamplerConfig) -> BoundInterval:
    """Admissible [lower, upper] for one coefficient, others held at ``fixed``.

    Each endpoint is located by bisection on displacement(value) - budget and
    then re-checked against the forward model.  Raises
    :class:`BudgetExhausted` when the fixed coefficients alone already exceed
    the budget, or when a returned endpoint fails re-validation (possible only
    with degenerate bisection settings).
    """
    if name not in COEFFICIENT_NAMES:
        raise ValueError(f"unknown coefficient {name!r}")
    budget = cfg.max_displacement_px
    tol = cfg.bisection_tol
    x0, y0 = pixel_to_normalized(0.0, 0.0, intr)
    vals = list(fixed.as_tuple())
    idx = COEFFICIENT_NAMES.index(name)

    def h(c: float) -> float:
        vals[idx] = c
        return _displacement_raw(x0, y0, intr, *vals)

    base = h(0.0)
    if base > budget + tol:
        raise BudgetExhausted(
            f"fixed coefficients already displace the reference pixel by "
            f"{base:.6f} px, beyond the budget of {budget} px",
            coefficient=name, displacement=base, budget=budget)
    if base >= budget:
        # The budget is already fully consumed (within tolerance): only zero
        # remains admissible.  Covers the degenerate zero-budget case.
        return BoundInterval(0.0, 0.0, 0, 0)

    limit = cfg.search_limit(name)
    upper, it_up = _bisect_endpoint(h, limit, budget, tol, cfg.bisection_max_iter)
    lower, it_lo = _bisect_endpoint(h, -limit, budget, tol, cfg.bisection_max_iter)
    for endpoint in (lower, upper):
        d = h(endpoint)
        if d > budget + tol:
            raise BudgetExhausted(
                f"bisection endpoint for {name} failed forward-model "
                f"re-validation: displacement {d:.6f} px > budget {budget} px "
                f"+ tol {tol}", coefficient=name, displacement=d, budget=budget)
    return BoundInterval(lower, upper, it_lo, it_up)


@lru_cache(maxsize=64)
def _border_pixels(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates of the destination frame border, each exactly once."""
    us = np.arange(width, dtype=np.float64)
    vs = np.arange(height, dtype=np.float64)
    parts_u = [us, us]
    parts_v = [np.zeros(width), np.full(width, float(height - 1))]
    if height > 2:
        inner = vs[1:-1]
        parts_u += [np.zeros(inner.size), np.full(inner.size, float(width - 1))]
        parts_v += [inner, inner]
    pu = np.concatenate(parts_u)
    pv = np.concatenate(parts_v)
    if height == 1:
        pu, pv = us.copy(), np.zeros(width)
    pu.setflags(write=False)
    pv.setflags(write=False)
    return pu, pv


def _required_zoom_estimate(nx: np.ndarray, ny: np.ndarray,
                            coeffs: DistortionCoefficients) -> float | None:
    # Forward-distort the source border ring.  Destination border points move
    # radially toward the origin as the focal scale grows, so for a mildly
    # distorted (star-shaped) ring the zoom needed per point is the ratio of
    # its radius to the ring radius along its direction.  Used only to seed
    # the bisection bracket; the inverse-map check is authoritative.
    dx, dy = distort(nx, ny, coeffs)
    if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
        return None
    rho = np.hypot(dx, dy)
    if np.any(rho <= 0.0):
        return None
    theta = np.arctan2(dy, dx)
    r_dest = np.hypot(nx, ny)
    theta_dest = np.arctan2(ny, nx)
    rho_at = np.interp(theta_dest, theta, rho, period=2.0 * math.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = float(np.max(r_dest / rho_at))
    if not math.isfinite(s):
        return None
    return s


def compute_focal_scale(intr: Intrinsics, coeffs: DistortionCoefficients, *,
                        rel_tol: float = 1e-4, undistort_tol: float = 1e-10,
                        undistort_max_iter: int = 50) -> float:
    """Smallest focal zoom that keeps the distorted render free of black fill.

    Multiplying fx and fy of the destination camera by the returned scale
    makes the inverse-mapped source location of every destination border
    pixel land inside the source frame [0, W-1] x [0, H-1] (sampling the
    source at the unscaled focal).  The scale is located by checking all
    border pixels and bisecting to ``rel_tol`` relative; the returned value is
    the certified-safe end of the final bracket.  Returns exactly 1.0 for
    zero coefficients.
    """
    if coeffs.is_zero:
        return 1.0
    geom = intr.geometry
    width, height = geom.width_px, geom.height_px
    pu, pv = _border_pixels(width, height)
    nx, ny = pixel_to_normalized(pu, pv, intr)

    def safe(s: float) -> bool:
        x, y, ok, _ = _undistort_arrays(nx / s, ny / s, coeffs,
                                        undistort_tol, undistort_max_iter)
        if not ok.all():
            return False
        u, v = normalized_to_pixel(x, y, intr)
        return bool((u >= -FRAME_EPS).all() and (u <= width - 1 + FRAME_EPS).all()
                    and (v >= -FRAME_EPS).all() and (v <= height - 1 + FRAME_EPS).all())

    # The forward-distorted border ring gives the required zoom per border
    # pixel in closed form (destination points shrink radially toward the
    # origin as the focal grows); its max is the scale, exact up to the ring
    # sampling for mildly distorted rings.  The inverse map then certifies
    # the result; when certification fails the bisection fallback below is
    # authoritative.
    est = _required_zoom_estimate(nx, ny, coeffs)
    if est is not None:
        if est <= 1.0 and safe(1.0):
            return 1.0
        if est > 1.0:
            cand = est * (1.0 + 0.25 * rel_tol)
            if safe(cand):
                return cand
    elif safe(1.0):
        return 1.0

    hi = est if est is not None and est > 1.0 else 2.0
    lo = 1.0
    doublings = 0
    while not safe(hi):
        lo = hi
        hi *= 2.0
        doublings += 1
        if doublings > 60:
            raise NonConvergence(
                f"no focal scale up to {hi:.3e} removes out-of-frame samples",
                last_iterate=hi)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if safe(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sample_camera(geometry: ImageGeometry, cfg: SamplerConfig,
                  rng: np.random.Generator) -> SampledCamera:
    """Draw one camera: FOV, bounded coefficients, principal shift, focal scale.

    The horizontal FOV is picked uniformly from the configured choices and the
    five coefficients are visited in a uniformly random order; each is bounded
    given the already-drawn ones and drawn uniformly from its interval.  The
    joint draw is re-validated against the forward model before the principal
    shift and focal rescale are applied.  Bitwise deterministic for a given
    RNG state.
    """
    cfg.validate_for_geometry(geometry)
    choices = cfg.hfov_choices_deg
    hfov = float(choices[int(rng.integers(len(choices)))])
    base = intrinsics_from_hfov(hfov, geometry)

    order = tuple(COEFFICIENT_NAMES[i] for i in rng.permutation(len(COEFFICIENT_NAMES)))
    coeffs = DistortionCoefficients()
    for name in order:
        interval = bound_coefficient(name, coeffs, base, cfg)
        value = float(rng.uniform(interval.lower, interval.upper))
        coeffs = replace(coeffs, **{name: value})

    disp = poi_displacement(coeffs, base)
    if disp > cfg.max_displacement_px + cfg.bisection_tol:
        raise BudgetExhausted(
            f"joint coefficient draw displaces the reference pixel by "
            f"{disp:.6f} px, beyond budget {cfg.max_displacement_px} px "
            f"+ tol {cfg.bisection_tol}",
            displacement=disp, budget=cfg.max_displacement_px)

    sx, sy = cfg.principal_shift()
    dcx = float(rng.uniform(-sx, sx))
    dcy = float(rng.uniform(-sy, sy))
    shifted = base.with_principal_point(base.cx + dcx, base.cy + dcy)

    scale = compute_focal_scale(shifted, coeffs)
    final = shifted.with_focal_scaled(scale)
    return SampledCamera(
        intrinsics=final,
        coefficients=coeffs,
        hfov_deg=fx_to_hfov(final.fx, geometry.width_px),
        focal_scale=scale,
        draw_order=order,
    )
