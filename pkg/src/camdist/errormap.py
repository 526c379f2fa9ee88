"""Pixel-wise error maps scoring predicted camera parameters.

Every pixel of a blank grid is pushed through the distortion of the true
parameters and then through the inverse distortion of the predicted ones;
the distance between where it lands and where it started, divided by the
image width, is the error at that pixel.  Displacements along both axes are
normalized by the width.  Maps from many predictions are averaged, three
horizontal line profiles (top, middle, bottom rows) are extracted, and each
profile is summarized by its min and max in a fixed milli-unit notation.

Note the frame conventions: the distorted position is normalized with the
true intrinsics and the recovered ideal point is projected with the
predicted intrinsics, so principal-point and focal errors show up directly
in the map instead of cancelling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .camera import (
    DEFAULT_UNDISTORT_MAX_ITER,
    DEFAULT_UNDISTORT_TOL,
    DistortionCoefficients,
    ImageGeometry,
    Intrinsics,
    _undistort_arrays,
    distort,
    hfov_to_fx,
    normalized_to_pixel,
    pixel_to_normalized,
)
from .errors import NonConvergence, PredictionsFormatError

PARAMETER_FIELDS = ("hfov_deg", "cx", "cy", "k1", "k2", "k3", "p1", "p2")

PROFILE_POSITIONS = ("top", "middle", "bottom")

DEFAULT_EVAL_GEOMETRY = ImageGeometry(1392, 512)


@dataclass(frozen=True)
class CameraParameterVector:
    """The eight regression targets: horizontal FOV, principal point, coefficients."""

    hfov_deg: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError(f"hfov_deg must be in (0, 180), got {self.hfov_deg}")
        for name in PARAMETER_FIELDS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"parameter {name} must be finite")

    def intrinsics(self, geometry: ImageGeometry) -> Intrinsics:
        """Reconstruct intrinsics: fx from the FOV, fy = fx, zero skew."""
        fx = hfov_to_fx(self.hfov_deg, geometry.width_px)
        return Intrinsics(fx=fx, fy=fx, cx=self.cx, cy=self.cy, geometry=geometry)

    def coefficients(self) -> DistortionCoefficients:
        return DistortionCoefficients(self.k1, self.k2, self.k3, self.p1, self.p2)

    def to_mapping(self) -> dict:
        return {name: float(getattr(self, name)) for name in PARAMETER_FIELDS}

    @classmethod
    def from_mapping(cls, data: dict) -> "CameraParameterVector":
        missing = [name for name in PARAMETER_FIELDS if name not in data]
        if missing:
            raise KeyError(f"missing parameter fields: {', '.join(missing)}")
        return cls(**{name: float(data[name]) for name in PARAMETER_FIELDS})


@dataclass
class ErrorMap:
    """Per-pixel displacement errors, normalized by the image width."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError(f"expected a 2-D error map, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("error map values must be finite and non-negative")
        self.values = vals

    @property
    def geometry(self) -> ImageGeometry:
        return ImageGeometry(width_px=self.values.shape[1], height_px=self.values.shape[0])


@dataclass(frozen=True)
class LineProfile:
    """One row of an error map, labeled by its vertical position."""

    position: str
    row_index: int
    values: np.ndarray


def pixel_error_map(true_params: CameraParameterVector,
                    pred_params: CameraParameterVector,
                    geometry: ImageGeometry = DEFAULT_EVAL_GEOMETRY, *,
                    tol: float = DEFAULT_UNDISTORT_TOL,
                    max_iter: int = DEFAULT_UNDISTORT_MAX_ITER) -> ErrorMap:
    """Distort with the true parameters, undistort with the predicted ones.

    Raises :class:`NonConvergence` naming the first offending pixel when the
    inverse distortion fails under the predicted parameters.
    """
    true_intr = true_params.intrinsics(geometry)
    pred_intr = pred_params.intrinsics(geometry)
    u, v = np.meshgrid(np.arange(geometry.width_px, dtype=np.float64),
                       np.arange(geometry.height_px, dtype=np.float64))
    x, y = pixel_to_normalized(u, v, true_intr)
    xd, yd = distort(x, y, true_params.coefficients())
    ud, vd = normalized_to_pixel(xd, yd, true_intr)
    x2, y2 = pixel_to_normalized(ud, vd, true_intr)
    xi, yi, ok, iterations = _undistort_arrays(x2, y2, pred_params.coefficients(),
                                               tol, max_iter)
    if not ok.all():
        bad = np.argwhere(~ok)[0]
        raise NonConvergence(
            f"undistortion with the predicted parameters did not converge at "
            f"pixel (u={bad[1]}, v={bad[0]}) after {iterations} iterations",
            iterations=iterations)
    uf, vf = normalized_to_pixel(xi, yi, pred_intr)
    err = np.hypot(uf - u, vf - v) / geometry.width_px
    return ErrorMap(err)


def mean_error_map(maps) -> ErrorMap:
    """Element-wise mean, accumulated in input order for determinism."""
    maps = list(maps)
    if not maps:
        raise ValueError("mean_error_map needs at least one map")
    geometry = maps[0].geometry
    acc = np.zeros_like(maps[0].values)
    for m in maps:
        if m.geometry != geometry:
            raise ValueError(f"geometry mismatch: {m.geometry} vs {geometry}")
        acc += m.values
    return ErrorMap(acc / len(maps))


def extract_line_profiles(emap: ErrorMap) -> tuple[LineProfile, LineProfile, LineProfile]:
    """Rows 0, H // 2 and H - 1, labeled top / middle / bottom."""
    height = emap.geometry.height_px
    if height < 3:
        raise ValueError(f"need at least 3 rows for line profiles, got {height}")
    rows = (0, height // 2, height - 1)
    return tuple(LineProfile(pos, row, emap.values[row].copy())
                 for pos, row in zip(PROFILE_POSITIONS, rows))


@dataclass(frozen=True)
class ProfileSummary:
    position: str
    min_error: float
    max_error: float


def summarize(profiles) -> list[ProfileSummary]:
    """Min and max per profile."""
    profiles = list(profiles)
    if not profiles:
        raise ValueError("summarize needs at least one profile")
    return [ProfileSummary(p.position, float(np.min(p.values)), float(np.max(p.values)))
            for p in profiles]


def format_error(value: float) -> str:
    """Milli-unit scientific notation with two decimals, e.g. 5.84e-03."""
    return f"{value * 1e3:.2f}e-03"


def summary_to_csv(rows) -> str:
    lines = ["position,min,max"]
    for row in rows:
        lines.append(f"{row.position},{format_error(row.min_error)},{format_error(row.max_error)}")
    return "\n".join(lines) + "\n"


def summary_from_csv(text: str) -> list[ProfileSummary]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "position,min,max":
        raise ValueError("summary CSV must start with a 'position,min,max' header")
    rows = []
    for ln in lines[1:]:
        position, min_s, max_s = ln.split(",")
        rows.append(ProfileSummary(position, float(min_s), float(max_s)))
    return rows


def render_summary_table(rows) -> str:
    """Plain-text min/max table over the three horizontal lines."""
    header = f"{'LINE':<10} {'MIN ERROR':>12} {'MAX ERROR':>12}"
    out = [header, "-" * len(header)]
    for row in rows:
        out.append(f"{row.position:<10} {format_error(row.min_error):>12} "
                   f"{format_error(row.max_error):>12}")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class PredictionRecord:
    """One scored prediction: ground truth and predicted parameter vectors."""

    id: str
    width: int
    height: int
    true: CameraParameterVector
    pred: CameraParameterVector

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "width": self.width,
            "height": self.height,
            "true": self.true.to_mapping(),
            "pred": self.pred.to_mapping(),
        }


def write_predictions(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict()) + "\n")


def read_predictions(path) -> list[PredictionRecord]:
    """Parse a newline-delimited predictions file.

    Raises :class:`PredictionsFormatError` carrying the first offending line
    number.
    """
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                rec = PredictionRecord(
                    id=str(data["id"]),
                    width=int(data["width"]),
                    height=int(data["height"]),
                    true=CameraParameterVector.from_mapping(data["true"]),
                    pred=CameraParameterVector.from_mapping(data["pred"]),
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise PredictionsFormatError(
                    f"bad predictions record on line {lineno}: {exc}",
                    line_number=lineno) from exc
            records.append(rec)
    return records


def error_map_to_heat_png(emap: ErrorMap):
    """Grayscale heat rendering: 0 maps to black, the map maximum to white."""
    from .raster import RasterImage

    peak = float(np.max(emap.values))
    if peak <= 0.0:
        scaled = np.zeros_like(emap.values)
    else:
        scaled = emap.values / peak
    return RasterImage(np.rint(scaled * 255.0).astype(np.uint8))
