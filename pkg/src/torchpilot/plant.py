"""Synthetic heat-pool plant and frame renderer.

Every constant here is a simulation choice: the real process is a steel
plate burning under an oxy-propane torch, which this model only mimics
qualitatively. Pool heat relaxes toward a velocity-dependent steady state
``phi(v) = s0 * exp(-beta * v)`` with a first-order lag. The cut deepens
under the flame while the pool burns, re-seals behind the torch when the
pool overheats, and stops for good once the pool goes out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .imgproc import RgbImage

# Plates used in the three-mode comparison, keyed by thickness in inches.
# (v_star cm/s, tau s, reseal_rate 1/s, cut_gain 1/s)
STANDARD_PLATES = {
    0.250: (0.95, 0.8, 0.0, 12.0),
    0.375: (0.78, 1.2, 0.5, 10.0),
    0.500: (0.74, 1.6, 0.8, 8.0),
}


@dataclass(frozen=True)
class PlateSpec:
    """Plate and its steady-state map; build with :meth:`calibrated`."""

    thickness: float  # in
    path_length: float  # cm
    tau: float  # s
    beta: float  # s/cm
    reseal_rate: float  # depth fraction / s
    s0: float = 0.97
    cut_gain: float = 10.0  # depth fraction / s per unit pool heat
    v_star: float = 0.0  # cm/s; informational, used for time-outs

    def __post_init__(self):
        if not self.thickness > 0:
            raise InvalidInputError("thickness must be > 0")
        if not self.path_length > 0:
            raise InvalidInputError("path_length must be > 0")
        if not self.tau > 0:
            raise InvalidInputError("tau must be > 0")
        if not self.beta > 0:
            raise InvalidInputError("beta must be > 0")
        if not 0 < self.s0 <= 1:
            raise InvalidInputError("s0 must lie in (0, 1]")
        if self.reseal_rate < 0 or self.cut_gain <= 0:
            raise InvalidInputError("reseal_rate must be >= 0 and cut_gain > 0")

    @classmethod
    def calibrated(
        cls,
        thickness: float,
        v_star: float,
        s_star: float,
        *,
        s0: float = 0.97,
        path_length: float = 20.0,
        tau: float | None = None,
        reseal_rate: float = 0.0,
        cut_gain: float = 10.0,
    ) -> "PlateSpec":
        """Solve ``beta`` so that ``phi(v_star) == s_star``."""
        if not 0 < s_star < s0:
            raise InvalidInputError("need 0 < s_star < s0")
        if not v_star > 0:
            raise InvalidInputError("v_star must be > 0")
        beta = math.log(s0 / s_star) / v_star
        if tau is None:
            tau = 3.2 * thickness  # 0.8 / 1.2 / 1.6 s for the standard plates
        return cls(thickness, path_length, tau, beta, reseal_rate, s0, cut_gain, v_star)

    @classmethod
    def standard(cls, thickness: float, s_star: float = 0.6, path_length: float = 20.0) -> "PlateSpec":
        try:
            v_star, tau, reseal, gain = STANDARD_PLATES[round(thickness, 3)]
        except KeyError:
            raise InvalidInputError(f"no standard plate of thickness {thickness} in") from None
        return cls.calibrated(
            thickness, v_star, s_star, path_length=path_length, tau=tau, reseal_rate=reseal, cut_gain=gain
        )


@dataclass(frozen=True)
class PlantParams:
    """Thresholds on the normalised pool-heat scale plus cutting geometry."""

    theta_burn: float = 0.45
    theta_reseal: float = 0.85
    theta_ext: float = 0.15
    bin_size: float = 0.1  # cm
    flame_radius: float = 0.25  # cm, half-width of the cutting footprint
    reseal_window: float = 0.5  # cm behind the footprint
    v_max: float = 4.0  # cm/s, slider limit (open-loop modes may exceed the controller's)

    def __post_init__(self):
        if not 0 < self.theta_ext < self.theta_burn < self.theta_reseal:
            raise InvalidInputError("need 0 < theta_ext < theta_burn < theta_reseal")
        if not (self.bin_size > 0 and self.flame_radius > 0 and self.reseal_window >= 0 and self.v_max > 0):
            raise InvalidInputError("plant geometry must be positive")


def phi(v: float, plate: PlateSpec) -> float:
    """Steady-state combustion level reached at constant torch speed ``v``."""
    if v < 0:
        raise InvalidInputError("velocity must be >= 0")
    return plate.s0 * math.exp(-plate.beta * v)


@dataclass(frozen=True, eq=False)
class PlantState:
    torch_position: float = 0.0
    torch_velocity: float = 0.0
    pool_heat: float = 0.0
    cut_depth: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bypass_engaged: bool = False
    preheated: bool = False
    extinguished: bool = False

    def __post_init__(self):
        depth = np.array(self.cut_depth, dtype=float)
        depth.setflags(write=False)
        object.__setattr__(self, "cut_depth", depth)
        if self.torch_velocity < 0:
            raise InvalidInputError("torch velocity must be >= 0")
        if self.pool_heat < 0:
            raise InvalidInputError("pool heat must be >= 0")

    @classmethod
    def initial(cls, plate: PlateSpec, params: PlantParams = PlantParams()) -> "PlantState":
        n = int(math.ceil(plate.path_length / params.bin_size - 1e-9))
        return cls(cut_depth=np.zeros(n))

    def __eq__(self, other):
        if not isinstance(other, PlantState):
            return NotImplemented
        return (
            self.torch_position == other.torch_position
            and self.torch_velocity == other.torch_velocity
            and self.pool_heat == other.pool_heat
            and self.bypass_engaged == other.bypass_engaged
            and self.preheated == other.preheated
            and self.extinguished == other.extinguished
            and np.array_equal(self.cut_depth, other.cut_depth)
        )


def _exposure(centers: np.ndarray, p0: float, p1: float, r: float, dt: float) -> np.ndarray:
    """Time each bin centre spends within ``r`` of a torch moving p0 -> p1 in ``dt``."""
    if p1 <= p0:
        return np.where(np.abs(centers - p0) <= r, dt, 0.0)
    lo = np.maximum(centers - r, p0)
    hi = np.minimum(centers + r, p1)
    return np.clip(hi - lo, 0.0, None) * (dt / (p1 - p0))


def step(
    state: PlantState,
    accel: float,
    dt: float,
    plate: PlateSpec,
    params: PlantParams = PlantParams(),
) -> PlantState:
    """Advance the plant by one explicit-Euler step of length ``dt``."""
    if not dt > 0:
        raise InvalidInputError("dt must be > 0")
    v = min(max(state.torch_velocity + accel * dt, 0.0), params.v_max)
    p0 = state.torch_position
    p1 = min(p0 + v * dt, plate.path_length)
    heat = state.pool_heat

    target = 0.0 if state.extinguished else phi(v, plate)
    new_heat = max(heat + dt * (target - heat) / plate.tau, 0.0)

    depth = np.array(state.cut_depth, dtype=float)
    burning = state.bypass_engaged and not state.extinguished
    centers = (np.arange(depth.size) + 0.5) * params.bin_size
    if burning and heat >= params.theta_burn:
        depth += plate.cut_gain * heat * _exposure(centers, p0, p1, params.flame_radius, dt)
    if burning and heat >= params.theta_reseal and plate.reseal_rate > 0:
        back = p1 - params.flame_radius
        behind = (centers < back) & (centers >= back - params.reseal_window)
        depth[behind] -= plate.reseal_rate * dt
    np.clip(depth, 0.0, 1.0, out=depth)

    extinguished = state.extinguished or (state.bypass_engaged and new_heat < params.theta_ext)
    return replace(
        state,
        torch_position=p1,
        torch_velocity=v,
        pool_heat=new_heat,
        cut_depth=depth,
        extinguished=extinguished,
    )


# ---------------------------------------------------------------------------
# Rendering


@dataclass(frozen=True)
class NoiseConfig:
    """Disturbances layered on rendered frames.

    ``background`` lifts every channel (light pollution), sparks are bright
    specks at least ``spark_min_distance`` px from the flame, and the trail
    is a dim red streak of residual heat behind the torch. Sparks are
    thrown only while the pool is burning.
    """

    enabled: bool = True
    background: float = 30.0
    pixel_sigma: float = 6.0
    spark_probability: float = 0.3
    spark_max: int = 3
    spark_radius: float = 1.5
    spark_min_distance: float = 60.0
    trail: bool = True
    trail_half_width: float = 2.0
    trail_px_per_cm: float = 8.0

    def __post_init__(self):
        if self.background < 0 or self.pixel_sigma < 0:
            raise InvalidInputError("noise levels must be >= 0")
        if not 0 <= self.spark_probability <= 1:
            raise InvalidInputError("spark_probability must lie in [0, 1]")
        if self.spark_max < 0 or self.spark_radius <= 0 or self.spark_min_distance < 0:
            raise InvalidInputError("invalid spark settings")


NO_NOISE = NoiseConfig(enabled=False)

# Per-pixel RGB for each rendered layer; hot layers light more channels.
_BLACK_RGB = (25, 15, 10)
_RED_RGB = (240, 110, 50)
_GREEN_RGB = (245, 240, 110)
_BLUE_RGB = (235, 245, 255)
_TRAIL_RGB = (225, 70, 35)

# Pool geometry against pool heat: (heat, outer radius px, notch depth,
# notch sharpness). Sharpness < 1 narrows the lobes between notches.
# Fitted offline so that the default vision pipeline reads back a combustion
# state close to the pool heat; see tests/test_plant.py for the check.
POOL_TABLE = (
    (0.00, 0.000, 0.0000, 0.300),
    (0.10, 9.637, 0.9003, 0.300),
    (0.15, 12.918, 0.8285, 0.300),
    (0.20, 14.033, 0.7077, 0.300),
    (0.25, 15.555, 0.6846, 0.300),
    (0.30, 16.553, 0.6112, 0.300),
    (0.35, 16.444, 0.5482, 0.300),
    (0.40, 16.843, 0.4476, 0.300),
    (0.45, 16.514, 0.4108, 0.475),
    (0.50, 16.457, 0.3472, 0.650),
    (0.55, 16.397, 0.2830, 0.825),
    (0.60, 16.178, 0.1625, 1.000),
    (0.65, 19.327, 0.1700, 1.000),
    (0.70, 22.154, 0.1588, 1.000),
    (0.75, 24.900, 0.1570, 1.000),
    (0.80, 27.599, 0.1419, 1.000),
    (0.85, 29.800, 0.1326, 1.000),
    (0.90, 32.349, 0.1373, 1.000),
    (0.95, 34.908, 0.1341, 1.000),
    (1.00, 36.774, 0.1241, 1.000),
)


@dataclass(frozen=True)
class RenderConfig:
    width: int = 128
    height: int = 128
    flame_center: tuple[float, float] = (64.0, 64.0)
    # where the pool sits relative to the flame; sub-pixel so pixel rings
    # do not flip in symmetric groups
    pool_offset: tuple[float, float] = (-0.37, 0.23)
    flame_radii: tuple[float, float, float] = (8.5, 11.5, 14.5)  # blue, green, red
    lobes: int = 5
    lobe_phase: float = 0.3
    green_band: float = 2.0
    red_band: float = 3.0
    min_visible_heat: float = 0.02
    pool_table: tuple = POOL_TABLE

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("frame size must be positive")
        cx, cy = self.flame_center
        if not (0 <= cx < self.width and 0 <= cy < self.height):
            raise InvalidInputError("flame centre outside the frame")


class _Grid:
    """Pixel-centre coordinates cached per render configuration."""

    _cache: dict = {}

    @classmethod
    def get(cls, cfg: RenderConfig):
        key = (cfg.width, cfg.height, cfg.flame_center, cfg.pool_offset, cfg.lobes, cfg.lobe_phase)
        hit = cls._cache.get(key)
        if hit is None:
            ys, xs = np.mgrid[0 : cfg.height, 0 : cfg.width].astype(float)
            fx, fy = cfg.flame_center
            px, py = fx + cfg.pool_offset[0], fy + cfg.pool_offset[1]
            flame_r = np.hypot(xs - fx, ys - fy)
            pool_r = np.hypot(xs - px, ys - py)
            theta = np.arctan2(ys - py, xs - px)
            notch = 0.5 * (1.0 - np.cos(cfg.lobes * (theta - cfg.lobe_phase)))
            hit = (xs, ys, flame_r, pool_r, notch)
            cls._cache[key] = hit
        return hit


def pool_geometry(heat: float, cfg: RenderConfig = RenderConfig()) -> tuple[float, float, float]:
    """Outer radius (px), notch depth (fraction) and notch sharpness at ``heat``."""
    table = np.asarray(cfg.pool_table, dtype=float)
    h = min(max(heat, table[0, 0]), table[-1, 0])
    return tuple(float(np.interp(h, table[:, 0], table[:, k])) for k in (1, 2, 3))


def render(
    state: PlantState,
    cal_mode: bool,
    noise: NoiseConfig = NO_NOISE,
    rng_seed: int = 0,
    cfg: RenderConfig = RenderConfig(),
) -> RgbImage:
    """Draw the camera's view of the flame (``cal_mode``) or of the heat pool."""
    xs, ys, flame_r, pool_r, notch = _Grid.get(cfg)
    img = np.empty((cfg.height, cfg.width, 3), dtype=float)
    img[:] = _BLACK_RGB
    rng = np.random.default_rng(rng_seed)

    if cal_mode:
        rb, rg, rr = cfg.flame_radii
        img[flame_r < rr] = _RED_RGB
        img[flame_r < rg] = _GREEN_RGB
        img[flame_r < rb] = _BLUE_RGB
    else:
        fx, fy = cfg.flame_center
        if noise.enabled and noise.trail and state.torch_position > 0:
            length = min(state.torch_position * noise.trail_px_per_cm, fx)
            trail = (np.abs(ys - fy) <= noise.trail_half_width) & (xs <= fx) & (xs >= fx - length)
            img[trail] = _TRAIL_RGB
        if not state.extinguished and state.pool_heat >= cfg.min_visible_heat:
            radius, depth, sharpness = pool_geometry(state.pool_heat, cfg)
            edge = radius * (1.0 - depth * notch**sharpness)
            img[pool_r < edge + cfg.green_band + cfg.red_band] = _RED_RGB
            img[pool_r < edge + cfg.green_band] = _GREEN_RGB
            img[pool_r < edge] = _BLUE_RGB
        burning = state.bypass_engaged and not state.extinguished
        if burning and noise.enabled and noise.spark_max > 0 and rng.random() < noise.spark_probability:
            for _ in range(int(rng.integers(1, noise.spark_max + 1))):
                for _attempt in range(32):
                    sx = rng.uniform(0, cfg.width)
                    sy = rng.uniform(0, cfg.height)
                    if math.hypot(sx - fx, sy - fy) >= noise.spark_min_distance:
                        img[np.hypot(xs - sx, ys - sy) <= noise.spark_radius] = _BLUE_RGB
                        break

    if noise.enabled:
        img += noise.background
        if noise.pixel_sigma > 0:
            img += rng.normal(0.0, noise.pixel_sigma, size=img.shape)
    return RgbImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))
