"""Shared test oracles.

The distortion reference here is written out literally (no Horner nesting,
no shared subexpressions with the library) so it stays an independent check
of the production code paths.
"""

from __future__ import annotations

import numpy as np


def reference_distort(x, y, k1=0.0, k2=0.0, k3=0.0, p1=0.0, p2=0.0):
    """Literal transcription of the radial + tangential model."""
    r2 = x * x + y * y
    radial = 1.0 + k1 * r2 + k2 * r2 ** 2 + k3 * r2 ** 3
    xd = x * radial + (2.0 * p1 * x * y + p2 * (r2 + 2.0 * x ** 2))
    yd = y * radial + (p1 * (r2 + 2.0 * y ** 2) + 2.0 * p2 * x * y)
    return xd, yd


def reference_poi_displacement(intr, k1=0.0, k2=0.0, k3=0.0, p1=0.0, p2=0.0):
    """Displacement of pixel (0, 0): normalize, distort, de-normalize, measure."""
    y = (0.0 - intr.cy) / intr.fy
    x = (0.0 - intr.cx - intr.skew * y) / intr.fx
    xd, yd = reference_distort(x, y, k1, k2, k3, p1, p2)
    u = intr.fx * xd + intr.skew * yd + intr.cx
    v = intr.fy * yd + intr.cy
    return float(np.hypot(u - 0.0, v - 0.0))


def trace_line(pixels: np.ndarray, v_start: float, columns, halfwin: int = 8):
    """Follow a dark horizontal line across the given columns.

    At each column the intensity-weighted centroid of darkness inside a
    vertical window around the previous position is taken.  Returns parallel
    arrays of column indices and sub-pixel row positions.
    """
    us, vs = [], []
    v = float(v_start)
    for u in columns:
        c = int(round(v))
        w0 = max(0, c - halfwin)
        w1 = min(pixels.shape[0], c + halfwin + 1)
        window = 255.0 - pixels[w0:w1, u].astype(np.float64)
        if window.sum() < 100.0:
            continue
        rows = np.arange(w0, w1, dtype=np.float64)
        v = float((window * rows).sum() / window.sum())
        us.append(u)
        vs.append(v)
    return np.asarray(us, dtype=np.float64), np.asarray(vs, dtype=np.float64)


def line_fit_rms(pixels: np.ndarray, v_start: float, u_lo: int, u_hi: int,
                 step: int = 4) -> float | None:
    """RMS residual of traced line samples against a least-squares line.

    Sample columns are restricted to those not crossed by a vertical grid
    line, probed on a background row a little above the line.
    """
    probe_row = max(0, int(v_start) - 20)
    columns = [u for u in range(u_lo, u_hi, step) if pixels[probe_row, u] > 200]
    us, vs = trace_line(pixels, v_start, columns)
    if us.size < 20:
        return None
    design = np.stack([np.ones_like(us), us], axis=1)
    coef, *_ = np.linalg.lstsq(design, vs, rcond=None)
    resid = vs - design @ coef
    return float(np.sqrt(np.mean(resid ** 2)))


def find_horizontal_line_rows(pixels: np.ndarray) -> list[int]:
    """Approximate row index of every dark horizontal line.

    Scans near the middle for a column that is mostly background (between
    vertical lines) and clusters its dark runs.
    """
    width = pixels.shape[1]
    for u in range(width // 2 - 32, width // 2 + 32):
        col = pixels[:, u]
        if (col > 200).sum() > pixels.shape[0] * 0.8:
            dark = np.flatnonzero(col < 100)
            if dark.size == 0:
                continue
            groups = np.split(dark, np.flatnonzero(np.diff(dark) > 1) + 1)
            return [int(np.mean(g)) for g in groups]
    return []


def black_row_runs(pixels: np.ndarray) -> int:
    """Number of contiguous runs of fully black rows."""
    black = (pixels == 0).all(axis=1).astype(np.int8)
    return int(np.count_nonzero(np.diff(np.concatenate(([0], black, [0]))) == 1))
