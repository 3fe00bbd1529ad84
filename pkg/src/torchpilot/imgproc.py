"""Colour quantisation and contour geometry for heat-pool frames.

Frames are numpy arrays indexed ``[row, col]``; geometric points are
``(x, y) = (col, row)``. Contours are positively oriented: their signed
shoelace area in ``(x, y)`` is positive, i.e. counter-clockwise in a y-up
frame (clockwise on screen, where y grows downward).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DegenerateHullError, InvalidInputError


class Color(IntEnum):
    BLACK = 0
    RED = 1
    GREEN = 2
    BLUE = 3


# RGB primaries used when a quantised image is written back out.
PRIMARIES = np.array(
    [(0, 0, 0), (255, 0, 0), (0, 255, 0), (0, 0, 255)], dtype=np.uint8
)

DEFAULT_CUTOFFS = (200, 200, 200)


def _frozen(arr: np.ndarray) -> np.ndarray:
    """Private read-only copy, so callers keep ownership of what they passed in."""
    arr = np.array(arr, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RgbImage:
    """An 8-bit RGB frame, ``pixels`` shaped ``(height, width, 3)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise InvalidInputError(f"expected (H, W, 3) pixels, got shape {px.shape}")
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise InvalidInputError("image must have non-zero width and height")
        object.__setattr__(self, "pixels", _frozen(px.astype(np.uint8, copy=False)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RgbImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class QuantizedImage:
    """A frame reduced to the four codes of :class:`Color`, shaped ``(H, W)``."""

    codes: np.ndarray

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2 or codes.shape[0] == 0 or codes.shape[1] == 0:
            raise InvalidInputError(f"expected non-empty (H, W) codes, got {codes.shape}")
        if codes.size and (codes.min() < 0 or codes.max() > 3):
            raise InvalidInputError("colour codes must lie in 0..3")
        object.__setattr__(self, "codes", _frozen(codes.astype(np.uint8, copy=False)))

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    def count(self, color: Color) -> int:
        return int(np.count_nonzero(self.codes == color))

    def to_rgb(self) -> RgbImage:
        """Render back to RGB using pure primaries."""
        return RgbImage(PRIMARIES[self.codes])

    def __eq__(self, other):
        if not isinstance(other, QuantizedImage):
            return NotImplemented
        return np.array_equal(self.codes, other.codes)


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed pixel polygon; ``points`` is ``(N, 2)`` of ``(x, y)``, not repeated at the end."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidInputError(f"contour points must be (N, 2), got {pts.shape}")
        object.__setattr__(self, "points", _frozen(pts))

    def __len__(self) -> int:
        return len(self.points)

    def reversed(self) -> "Contour":
        return Contour(self.points[::-1])

    def centroid(self) -> tuple[float, float]:
        """Area centroid of the polygon, or the vertex mean when the area vanishes."""
        x, y = self.points[:, 0], self.points[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = cross.sum() / 2.0
        if abs(a) < 1e-12:
            return float(x.mean()), float(y.mean())
        cx = ((x + xn) * cross).sum() / (6.0 * a)
        cy = ((y + yn) * cross).sum() / (6.0 * a)
        return float(cx), float(cy)

    def __eq__(self, other):
        if not isinstance(other, Contour):
            return NotImplemented
        return np.array_equal(self.points, other.points)


def quantize(img: RgbImage, cutoffs: Sequence[int] = DEFAULT_CUTOFFS) -> QuantizedImage:
    """Threshold each channel and resolve overlaps so one colour survives per pixel.

    A channel is "on" when its value strictly exceeds its cutoff. Where
    several channels are on, the hotter colour wins (blue > green > red).
    """
    if len(cutoffs) != 3:
        raise InvalidInputError("need one cutoff per channel")
    for c in cutoffs:
        if not 1 <= int(c) <= 255:
            raise InvalidInputError(f"cutoff {c} outside 1..255")
    px = img.pixels
    r = px[..., 0] > cutoffs[0]
    g = px[..., 1] > cutoffs[1]
    b = px[..., 2] > cutoffs[2]
    codes = np.zeros(px.shape[:2], dtype=np.uint8)
    codes[r] = Color.RED
    codes[g] = Color.GREEN
    codes[b] = Color.BLUE
    return QuantizedImage(codes)


# Moore neighbourhood, clockwise on screen starting from west: (dx, dy).
_DIRS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}
# After stepping along direction d, the last background pixel examined was
# dirs[d-1] relative to the old pixel; this is its direction from the new one.
_BACKTRACK = tuple(
    _DIR_INDEX[(_DIRS[d - 1][0] - _DIRS[d][0], _DIRS[d - 1][1] - _DIRS[d][1])]
    for d in range(8)
)


def _trace_component(mask: np.ndarray) -> list[tuple[int, int]]:
    """Moore-neighbour border following with Jacob's stopping criterion.

    ``mask`` must be padded so that no foreground pixel touches its edge.
    """
    h, w = mask.shape
    flat = mask.tobytes()
    first = flat.index(1)
    sy, sx = divmod(first, w)
    offsets = tuple(dx + dy * w for dx, dy in _DIRS)

    # The west neighbour of the raster-first pixel is background, so the
    # clockwise search starts one step past it.
    cur = first
    search = 1
    start_dir = None
    out = []
    while True:
        for k in range(8):
            d = (search + k) & 7
            if flat[cur + offsets[d]]:
                break
        else:
            return [(sx, sy)]  # isolated pixel
        if cur == first:
            if start_dir is None:
                start_dir = d
            elif d == start_dir:
                return out
        out.append((cur % w, cur // w))
        cur += offsets[d]
        search = (_BACKTRACK[d] + 1) & 7


_EIGHT = np.ones((3, 3), dtype=bool)


def extract_contours(img: QuantizedImage, target: Color) -> list[Contour]:
    """Trace the outer border of every 8-connected component of ``target``.

    Components whose border has fewer than three distinct pixels are dropped.
    """
    target = Color(target)
    if target == Color.BLACK:
        raise InvalidInputError("target must be RED, GREEN or BLUE")
    mask = img.codes == target
    if not mask.any():
        return []
    labels, n = ndimage.label(mask, structure=_EIGHT)
    contours = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        sub = np.pad((labels[sl] == idx).astype(np.uint8), 1)
        pts = _trace_component(sub)
        if len(set(pts)) < 3:
            continue
        arr = np.asarray(pts, dtype=float)
        arr[:, 0] += sl[1].start - 1
        arr[:, 1] += sl[0].start - 1
        contours.append(Contour(arr))
    return contours


def polygon_area(contour: Contour) -> float:
    """Absolute shoelace area of the closed polygon, in px^2."""
    if len(contour) < 3:
        raise InvalidInputError("polygon needs at least 3 points")
    return abs(_signed_area(contour.points))


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return float((x * np.roll(y, -1) - np.roll(x, -1) * y).sum()) / 2.0


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(contour: Contour) -> Contour:
    """Monotone-chain hull, positively oriented, collinear points dropped."""
    pts = sorted(set(map(tuple, contour.points.tolist())))
    if len(pts) < 3:
        raise DegenerateHullError("fewer than three distinct points")

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHullError("all points are collinear")
    return Contour(np.asarray(hull, dtype=float))


def select_pool_contour(
    contours: Sequence[Contour],
    centroid: tuple[float, float],
    distance_exponent: float = 1.0,
) -> Contour | None:
    """Pick the contour that is both large and close to the torch flame.

    Score is ``area / (1 + d) ** distance_exponent`` with ``d`` the distance
    from the contour's centroid to ``centroid``. Ties go to the closer
    contour, then to the lexicographically smaller first point.
    """
    best_key = None
    best = None
    for c in contours:
        cx, cy = c.centroid()
        dist = math.hypot(cx - centroid[0], cy - centroid[1])
        area = abs(_signed_area(c.points))
        score = area / (1.0 + dist) ** distance_exponent
        key = (-score, dist, tuple(c.points[0]))
        if best_key is None or key < best_key:
            best_key, best = key, c
    return best
