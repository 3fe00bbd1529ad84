"""Pool features: convexity, Gaussian-weighted intensity and combustion state."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import CalibrationError, DegenerateHullError, FeatureUnavailableError, InvalidInputError
from .imgproc import (
    Color,
    Contour,
    QuantizedImage,
    convex_hull,
    extract_contours,
    polygon_area,
    select_pool_contour,
)

INTENSITY_FLOOR = 1e-6


@dataclass(frozen=True)
class IntensityParams:
    sigma_x: float = 30.0
    sigma_y: float = 30.0
    w_red: float = 0.01
    w_green: float = 0.04
    w_blue: float = 0.16
    i_sat: float = 10.0
    eps: float = INTENSITY_FLOOR

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise InvalidInputError("sigma_x and sigma_y must be > 0")
        if not (0 < self.w_red < self.w_green < self.w_blue):
            raise InvalidInputError("weights must satisfy 0 < w_red < w_green < w_blue")
        if not self.i_sat >= 1:
            raise InvalidInputError("i_sat must be >= 1")
        if not 0 < self.eps < 1:
            raise InvalidInputError("eps must lie in (0, 1)")

    def weight_table(self) -> np.ndarray:
        """Weights indexed by colour code."""
        return np.array([0.0, self.w_red, self.w_green, self.w_blue])


@dataclass(frozen=True)
class Calibration:
    centroid: tuple[float, float]
    baseline_intensity: float

    def __post_init__(self):
        if not self.baseline_intensity > 0:
            raise CalibrationError("baseline intensity must be > 0")


@dataclass(frozen=True)
class PoolFeatures:
    convexity: float
    intensity: float
    state: float
    lam: float


def pool_convexity(pool: Contour) -> float:
    """Area of the pool contour over the area of its convex hull."""
    try:
        hull = convex_hull(pool)
    except DegenerateHullError as exc:
        raise FeatureUnavailableError(f"degenerate pool contour: {exc}") from exc
    hull_area = polygon_area(hull)
    area = polygon_area(pool)
    if area <= 0 or hull_area <= 0:
        raise FeatureUnavailableError("pool contour has no area")
    return min(area / hull_area, 1.0)


def gaussian_weight(p: tuple[float, float], cal: Calibration, params: IntensityParams) -> float:
    dx = p[0] - cal.centroid[0]
    dy = p[1] - cal.centroid[1]
    return math.exp(-dx * dx / (2 * params.sigma_x**2) - dy * dy / (2 * params.sigma_y**2))


def color_weight(code: Color, params: IntensityParams = IntensityParams()) -> float:
    return float(params.weight_table()[Color(code)])


@lru_cache(maxsize=32)
def _gaussian_map(height, width, cx, cy, sx, sy) -> np.ndarray:
    # separable: exp(a + b) = exp(a) * exp(b)
    gx = np.exp(-((np.arange(width) - cx) ** 2) / (2 * sx * sx))
    gy = np.exp(-((np.arange(height) - cy) ** 2) / (2 * sy * sy))
    g = np.outer(gy, gx)
    g.setflags(write=False)
    return g


def gaussian_map(height: int, width: int, cal: Calibration, params: IntensityParams) -> np.ndarray:
    """Decay factor for every pixel of a ``(height, width)`` frame."""
    return _gaussian_map(
        height, width, float(cal.centroid[0]), float(cal.centroid[1]), params.sigma_x, params.sigma_y
    )


def raw_intensity(img: QuantizedImage, cal: Calibration, params: IntensityParams) -> float:
    """Sum of Gaussian decay times colour weight over every pixel."""
    g = gaussian_map(img.height, img.width, cal, params)
    w = params.weight_table()[img.codes]
    return float(np.sum(g * w))


def _weighted_centroid(img: QuantizedImage, params: IntensityParams) -> tuple[float, float, float]:
    w = params.weight_table()[img.codes]
    total = w.sum()
    if total <= 0:
        raise CalibrationError("calibration frame has no lit pixels")
    ys, xs = np.indices(w.shape)
    return float((w * xs).sum() / total), float((w * ys).sum() / total), float(total)


def calibrate(frames: Sequence[QuantizedImage], params: IntensityParams) -> Calibration:
    """Locate the bare torch flame and measure its baseline intensity.

    The centroid is the colour-weighted mean position of lit pixels,
    averaged across frames; the baseline is the mean raw intensity of the
    frames evaluated around that centroid.
    """
    if not frames:
        raise CalibrationError("no calibration frames")
    shape = (frames[0].height, frames[0].width)
    cxs, cys = [], []
    for f in frames:
        if (f.height, f.width) != shape:
            raise CalibrationError("calibration frames differ in size")
        cx, cy, _ = _weighted_centroid(f, params)
        cxs.append(cx)
        cys.append(cy)
    centroid = (float(np.mean(cxs)), float(np.mean(cys)))
    probe = Calibration(centroid, 1.0)
    baseline = float(np.mean([raw_intensity(f, probe, params) for f in frames]))
    if not baseline > 0:
        raise CalibrationError("baseline intensity is zero")
    return Calibration(centroid, baseline)


def normalized_intensity(intensity: float, cal: Calibration, params: IntensityParams) -> float:
    """Baseline-relative intensity, saturated at ``i_sat`` and scaled into (0, 1]."""
    rel = intensity / cal.baseline_intensity
    return max(min(params.i_sat, rel) / params.i_sat, params.eps)


def combustion_state(c: float, i: float, lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError("lambda must lie in [0, 1]")
    return lam * c + (1.0 - lam) * i


@dataclass(frozen=True)
class Measurement:
    """Outcome of running the perception pipeline on one quantised frame.

    ``features`` is None when no usable pool was found; ``lit`` is False
    when the frame had no weighted pixels at all.
    """

    features: PoolFeatures | None
    raw_intensity: float
    lit: bool
    pool: Contour | None = None

    @property
    def pool_lost(self) -> bool:
        return self.features is None or not self.lit


def measure(
    img: QuantizedImage,
    cal: Calibration,
    params: IntensityParams,
    lam: float,
    distance_exponent: float = 1.0,
) -> Measurement:
    big_i = raw_intensity(img, cal, params)
    lit = big_i > 0
    pool = select_pool_contour(extract_contours(img, Color.BLUE), cal.centroid, distance_exponent)
    if pool is None or not lit:
        return Measurement(None, big_i, lit, pool)
    try:
        c = pool_convexity(pool)
    except FeatureUnavailableError:
        return Measurement(None, big_i, lit, pool)
    i = normalized_intensity(big_i, cal, params)
    return Measurement(PoolFeatures(c, i, combustion_state(c, i, lam), lam), big_i, lit, pool)


FEATURE_COLUMNS = ("frame_index", "c", "i", "s", "pool_lost")


def write_feature_csv(path, rows: Iterable[tuple[int, Measurement]]) -> None:
    """One row per frame; lost frames carry empty feature cells."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_COLUMNS)
        for idx, m in rows:
            f = m.features
            if f is None:
                w.writerow([idx, "", "", "", 1])
            else:
                w.writerow([idx, f"{f.convexity:.6f}", f"{f.intensity:.6f}", f"{f.state:.6f}", int(m.pool_lost)])
