"""Experiment workflow: ignite, calibrate, preheat, burn through, shut down.

One run is a sequential loop of perception, control and plant update at a
fixed period. Every random draw is keyed on ``(seed, mode, plate, tick)``
so a run is reproducible on its own, independent of what ran before it.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .control import ControllerParams, apply_velocity_update, control_accel, state_error
from .errors import InvalidInputError
from .features import Calibration, IntensityParams, PoolFeatures, calibrate, measure
from .imgproc import DEFAULT_CUTOFFS, quantize
from .plant import NoiseConfig, PlantParams, PlantState, PlateSpec, RenderConfig, phi, render, step
from .ppm import write_ppm

SLOW_SPEED = 0.2  # cm/s
FAST_SPEED = 3.2  # cm/s
DEPTH_TOLERANCE = 1e-6


class Phase(str, Enum):
    IGNITE = "ignite"
    CALIBRATE = "calibrate"
    PREHEAT = "preheat"
    COMBUSTION = "combustion"
    SHUTDOWN = "shutdown"


PHASE_ORDER = tuple(Phase)


class Mode(str, Enum):
    SLOW = "slow"
    FAST = "fast"
    CONTROLLED = "controlled"
    CONSTANT = "constant"


SUITE_MODES = (Mode.SLOW, Mode.FAST, Mode.CONTROLLED)


class Sensor(str, Enum):
    """Where the controller reads the combustion state from.

    ``VISION`` runs the full image pipeline. ``IDEAL`` feeds the plant's
    true pool heat, free of pixel quantisation, for checking the control
    law on its own; frames are still rendered and measured.
    """

    VISION = "vision"
    IDEAL = "ideal"


class AbortCause(str, Enum):
    POOL_LOST = "pool-lost"
    TIMEOUT = "path-timeout"
    PREHEAT_TIMEOUT = "preheat-timeout"


@dataclass(frozen=True)
class Experiment:
    """Everything one run needs; ``v_const`` is only read for ``Mode.CONSTANT``."""

    plate: PlateSpec
    mode: Mode = Mode.CONTROLLED
    v_const: float | None = None
    controller: ControllerParams = ControllerParams()
    intensity: IntensityParams = IntensityParams()
    lam: float = 0.5
    noise: NoiseConfig = NoiseConfig()
    render: RenderConfig = RenderConfig()
    plant: PlantParams = PlantParams()
    cutoffs: tuple[int, int, int] = DEFAULT_CUTOFFS
    distance_exponent: float = 1.0
    seed: int = 0
    calibration_frames: int = 10
    hold_steps: int = 5
    preheat_fraction: float = 0.9
    timeout_factor: float = 10.0
    initial_velocity_ratio: float = 0.5
    sensor: Sensor = Sensor.VISION

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "sensor", Sensor(self.sensor))
        if self.mode is Mode.CONSTANT:
            if self.v_const is None or self.v_const < 0:
                raise InvalidInputError("constant mode needs v_const >= 0")
            if self.v_const > self.plant.v_max:
                raise InvalidInputError(f"v_const exceeds the slider limit {self.plant.v_max}")
        if not 0 <= self.lam <= 1:
            raise InvalidInputError("lambda must lie in [0, 1]")
        if self.calibration_frames < 1:
            raise InvalidInputError("calibration_frames must be >= 1")
        if self.hold_steps < 0:
            raise InvalidInputError("hold_steps must be >= 0")
        if not 0 < self.preheat_fraction < 1:
            raise InvalidInputError("preheat_fraction must lie in (0, 1)")
        if not self.timeout_factor > 0:
            raise InvalidInputError("timeout_factor must be > 0")
        if not 0 <= self.initial_velocity_ratio:
            raise InvalidInputError("initial_velocity_ratio must be >= 0")
        if self.seed < 0:
            raise InvalidInputError("seed must be >= 0")

    @property
    def speed(self) -> float | None:
        """Open-loop torch speed, or None under feedback control."""
        return {Mode.SLOW: SLOW_SPEED, Mode.FAST: FAST_SPEED, Mode.CONSTANT: self.v_const}.get(self.mode)

    @property
    def label(self) -> str:
        return f"{self.mode.value}_{self.plate.thickness:.3f}"


@dataclass(frozen=True)
class TelemetryRecord:
    t: float
    position: float
    velocity: float
    accel: float
    c: float
    i: float
    s: float
    s_star: float
    phase: Phase
    pool_lost: bool


TELEMETRY_COLUMNS = ("t", "position", "velocity", "accel", "c", "i", "s", "s_star", "phase", "pool_lost")
SUMMARY_COLUMNS = ("mode", "thickness", "success_ratio", "steps", "aborted", "cause")


@dataclass(frozen=True, eq=False)
class RunResult:
    mode: Mode
    thickness: float
    telemetry: tuple[TelemetryRecord, ...]
    cut_profile: np.ndarray
    success_ratio: float
    calibration: Calibration | None
    phases: tuple[Phase, ...]
    combustion_start: float | None = None
    cause: AbortCause | None = None
    final_state: PlantState | None = field(default=None, repr=False)

    @property
    def aborted(self) -> bool:
        return self.cause is not None

    @property
    def steps(self) -> int:
        return len(self.telemetry)

    def combustion_records(self) -> list[TelemetryRecord]:
        return [r for r in self.telemetry if r.phase is Phase.COMBUSTION]

    def __eq__(self, other):
        if not isinstance(other, RunResult):
            return NotImplemented
        return (
            self.mode == other.mode
            and self.thickness == other.thickness
            and self.telemetry == other.telemetry
            and np.array_equal(self.cut_profile, other.cut_profile)
            and self.success_ratio == other.success_ratio
            and self.calibration == other.calibration
            and self.phases == other.phases
            and self.combustion_start == other.combustion_start
            and self.cause == other.cause
        )


def success_ratio(cut_profile: Sequence[float], tol: float = DEPTH_TOLERANCE) -> float:
    """Fraction of path bins cut all the way through."""
    depth = np.asarray(cut_profile, dtype=float)
    if depth.size == 0:
        raise InvalidInputError("empty cut profile")
    return float(np.count_nonzero(depth >= 1.0 - tol)) / depth.size


def _frame_seed(exp: Experiment, tick: int) -> int:
    key = [exp.seed, list(Mode).index(exp.mode), round(exp.plate.thickness * 1000), tick]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


class _Run:
    """Mutable bookkeeping for one run; discarded once the result is built."""

    def __init__(self, exp: Experiment, frame_dir: Path | None):
        self.exp = exp
        self.frame_dir = frame_dir
        self.tick = 0
        self.t = 0.0
        self.records: list[TelemetryRecord] = []
        self.phases: list[Phase] = []
        self.last: PoolFeatures | None = None
        self.lost_run = 0
        self.combustion_frames = 0

    def enter(self, phase: Phase) -> None:
        if self.phases and PHASE_ORDER.index(phase) != PHASE_ORDER.index(self.phases[-1]) + 1:
            raise RuntimeError(f"illegal phase transition {self.phases[-1]} -> {phase}")
        self.phases.append(phase)

    def frame(self, state: PlantState, cal_mode: bool):
        exp = self.exp
        rgb = render(state, cal_mode, exp.noise, _frame_seed(exp, self.tick), exp.render)
        self.tick += 1
        return rgb

    def dump(self, name: str, rgb) -> None:
        if self.frame_dir is not None:
            write_ppm(self.frame_dir / name, rgb)

    def observe(self, state: PlantState, cal: Calibration) -> bool:
        """Measure the pool; returns True when this frame lost it."""
        exp = self.exp
        rgb = self.frame(state, False)
        if self.phases[-1] is Phase.COMBUSTION:
            self.dump(f"frame_{self.combustion_frames:05d}.ppm", rgb)
            self.combustion_frames += 1
        m = measure(quantize(rgb, exp.cutoffs), cal, exp.intensity, exp.lam, exp.distance_exponent)
        if m.pool_lost:
            self.lost_run += 1
            return True
        self.lost_run = 0
        self.last = m.features
        return False

    def sensed_state(self, state: PlantState) -> float:
        if self.exp.sensor is Sensor.IDEAL:
            return state.pool_heat
        return self.last.state

    def log(self, state: PlantState, accel: float, lost: bool, sensed: float | None = None) -> None:
        f = self.last
        c, i, s = (f.convexity, f.intensity, f.state) if f is not None else (0.0, 0.0, 0.0)
        if sensed is not None:
            s = sensed
        self.records.append(
            TelemetryRecord(
                self.t,
                state.torch_position,
                state.torch_velocity,
                accel,
                c,
                i,
                s,
                self.exp.controller.desired_state,
                self.phases[-1],
                lost,
            )
        )


def _execute(exp: Experiment, frame_dir: str | os.PathLike | None) -> RunResult:
    if frame_dir is not None:
        frame_dir = Path(frame_dir)
        frame_dir.mkdir(parents=True, exist_ok=True)
    run = _Run(exp, frame_dir)
    plate, ctrl, dt = exp.plate, exp.controller, exp.controller.dt
    cause = None
    combustion_start = None

    run.enter(Phase.IGNITE)
    state = PlantState.initial(plate, exp.plant)

    run.enter(Phase.CALIBRATE)
    cal_frames = []
    for k in range(exp.calibration_frames):
        rgb = run.frame(state, True)
        run.dump(f"cal_{k:03d}.ppm", rgb)
        cal_frames.append(quantize(rgb, exp.cutoffs))
    cal = calibrate(cal_frames, exp.intensity)

    run.enter(Phase.PREHEAT)
    target = exp.preheat_fraction * phi(0.0, plate)
    # Heat approaches phi(0) geometrically; this bound is far past the threshold.
    max_preheat = int(math.ceil(50 * plate.tau / dt)) + 1
    for _ in range(max_preheat):
        if state.pool_heat >= target:
            break
        lost = run.observe(state, cal)
        state = step(state, 0.0, dt, plate, exp.plant)
        run.t += dt
        run.log(state, 0.0, lost)
    else:
        cause = AbortCause.PREHEAT_TIMEOUT

    if cause is None:
        state = replace(state, preheated=True)
        run.enter(Phase.COMBUSTION)
        combustion_start = run.t
        speed = exp.speed
        v0 = speed if speed is not None else exp.initial_velocity_ratio * plate.v_star
        state = replace(state, bypass_engaged=True, torch_velocity=min(v0, exp.plant.v_max))
        run.lost_run = 0
        nominal_v = plate.v_star if plate.v_star > 0 else ctrl.v_max
        max_steps = int(math.ceil(exp.timeout_factor * plate.path_length / nominal_v / dt))
        for _ in range(max_steps):
            lost = run.observe(state, cal)
            if run.lost_run > exp.hold_steps or run.last is None:
                run.log(state, 0.0, True)
                cause = AbortCause.POOL_LOST
                break
            sensed = run.sensed_state(state)
            if speed is None:
                accel = control_accel(state_error(ctrl.desired_state, sensed), ctrl)
                v = apply_velocity_update(state.torch_velocity, accel, ctrl)
            else:
                accel, v = 0.0, speed
            state = step(replace(state, torch_velocity=v), 0.0, dt, plate, exp.plant)
            run.t += dt
            run.log(state, accel, lost, sensed)
            if state.torch_position >= plate.path_length:
                break
        else:
            cause = AbortCause.TIMEOUT

    run.enter(Phase.SHUTDOWN)
    state = replace(state, bypass_engaged=False)
    return RunResult(
        mode=exp.mode,
        thickness=plate.thickness,
        telemetry=tuple(run.records),
        cut_profile=np.array(state.cut_depth),
        success_ratio=success_ratio(state.cut_depth),
        calibration=cal,
        phases=tuple(run.phases),
        combustion_start=combustion_start,
        cause=cause,
        final_state=state,
    )


def run_experiment(exp: Experiment, frame_dir: str | os.PathLike | None = None) -> RunResult:
    """Run the full workflow in the experiment's own mode.

    When ``frame_dir`` is given, calibration frames and every combustion
    frame are written there as binary PPM.
    """
    return _execute(exp, frame_dir)


def run_constant_speed(
    exp: Experiment, v_const: float, frame_dir: str | os.PathLike | None = None
) -> RunResult:
    """Same workflow, but the torch crosses the plate at ``v_const`` with no feedback."""
    return _execute(replace(exp, mode=Mode.CONSTANT, v_const=v_const), frame_dir)


def normalize(result: RunResult, params: ControllerParams) -> dict[str, np.ndarray]:
    """Series scaled for plotting: position by its final value, speed and accel by their limits."""
    rec = result.telemetry
    pos = np.array([r.position for r in rec])
    if pos.size == 0 or pos.max() <= 0:
        raise InvalidInputError("run covered zero path length")
    return {
        "t": np.array([r.t for r in rec]),
        "position": pos / pos.max(),
        "velocity": np.array([r.velocity for r in rec]) / params.v_max,
        "accel": np.array([r.accel for r in rec]) / params.a_max,
        "c": np.array([r.c for r in rec]),
        "i": np.array([r.i for r in rec]),
        "s": np.array([r.s for r in rec]),
        "s_star": np.array([r.s_star for r in rec]),
    }


def write_telemetry_csv(path: str | os.PathLike, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TELEMETRY_COLUMNS)
        for r in result.telemetry:
            w.writerow(
                [f"{r.t:.2f}"]
                + [f"{x:.6f}" for x in (r.position, r.velocity, r.accel, r.c, r.i, r.s, r.s_star)]
                + [r.phase.value, int(r.pool_lost)]
            )


def write_summary_csv(path: str | os.PathLike, results: Sequence[RunResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            w.writerow(
                [
                    r.mode.value,
                    f"{r.thickness:.3f}",
                    f"{r.success_ratio:.4f}",
                    r.steps,
                    int(r.aborted),
                    r.cause.value if r.cause else "",
                ]
            )
