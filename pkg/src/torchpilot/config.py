"""YAML run configuration.

Every key is optional; omitted keys take the defaults below. Unknown keys
are rejected so that typos do not silently fall back to a default.

.. code-block:: yaml

    seed: 0
    suite: false              # true runs slow/fast/controlled on all three plates
    mode: controlled          # slow | fast | controlled | constant
    v_const: null             # cm/s, required for mode: constant
    plate:
      thickness: 0.375        # in; 0.250, 0.375 or 0.500
      path_length: 20.0       # cm
      # v_star, tau, reseal_rate, cut_gain override the standard plate
    controller:
      gain: 200.0
      desired_state: 0.6      # derived from the references when omitted
      v_max: 2.0              # cm/s
      a_max: 0.8              # cm/s^2
      dt: 0.05                # s
    references: {c_star: 0.95, i_star: 0.25}
    lambda: 0.5
    intensity: {sigma_x: 30, sigma_y: 30, w_red: 0.01, w_green: 0.04, w_blue: 0.16, i_sat: 10, eps: 1.0e-6}
    vision: {cutoffs: [200, 200, 200], distance_exponent: 1.0}
    noise: {enabled: true, background: 30, pixel_sigma: 6, ...}
    harness: {calibration_frames: 10, hold_steps: 5, preheat_fraction: 0.9,
              timeout_factor: 10, initial_velocity_ratio: 0.5, sensor: vision}
    output: {dir: out, dump_frames: false}
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any

import yaml

from .control import ControllerParams
from .errors import ConfigParseError, ConfigValidationError, InvalidInputError
from .features import IntensityParams
from .harness import SUITE_MODES, Experiment, Mode, Sensor
from .imgproc import DEFAULT_CUTOFFS
from .plant import STANDARD_PLATES, NoiseConfig, PlateSpec

C_STAR = 0.95
I_STAR = 0.25
LAMBDA = 0.5


@dataclass(frozen=True)
class PlateConfig:
    thickness: float = 0.375
    path_length: float = 20.0
    v_star: float | None = None
    tau: float | None = None
    reseal_rate: float | None = None
    cut_gain: float | None = None

    def build(self, thickness: float, s_star: float) -> PlateSpec:
        key = round(thickness, 3)
        if key not in STANDARD_PLATES:
            raise InvalidInputError(f"thickness must be one of {sorted(STANDARD_PLATES)}")
        v_star, tau, reseal, gain = STANDARD_PLATES[key]
        pick = lambda own, std: std if own is None else own  # noqa: E731
        return PlateSpec.calibrated(
            key,
            pick(self.v_star, v_star),
            s_star,
            path_length=self.path_length,
            tau=pick(self.tau, tau),
            reseal_rate=pick(self.reseal_rate, reseal),
            cut_gain=pick(self.cut_gain, gain),
        )


@dataclass(frozen=True)
class HarnessConfig:
    calibration_frames: int = 10
    hold_steps: int = 5
    preheat_fraction: float = 0.9
    timeout_factor: float = 10.0
    initial_velocity_ratio: float = 0.5
    sensor: str = Sensor.VISION.value


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    suite: bool = False
    mode: str = Mode.CONTROLLED.value
    v_const: float | None = None
    plate: PlateConfig = PlateConfig()
    controller: ControllerParams = ControllerParams()
    c_star: float = C_STAR
    i_star: float = I_STAR
    lam: float = LAMBDA
    intensity: IntensityParams = IntensityParams()
    cutoffs: tuple[int, int, int] = DEFAULT_CUTOFFS
    distance_exponent: float = 1.0
    noise: NoiseConfig = NoiseConfig()
    harness: HarnessConfig = HarnessConfig()
    out_dir: str = "out"
    dump_frames: bool = False

    def experiment(self, mode: Mode | str | None = None, thickness: float | None = None) -> Experiment:
        mode = Mode(mode or self.mode)
        thickness = self.plate.thickness if thickness is None else thickness
        h = self.harness
        return Experiment(
            plate=self.plate.build(thickness, self.controller.desired_state),
            mode=mode,
            v_const=self.v_const if mode is Mode.CONSTANT else None,
            controller=self.controller,
            intensity=self.intensity,
            lam=self.lam,
            noise=self.noise,
            cutoffs=self.cutoffs,
            distance_exponent=self.distance_exponent,
            seed=self.seed,
            calibration_frames=h.calibration_frames,
            hold_steps=h.hold_steps,
            preheat_fraction=h.preheat_fraction,
            timeout_factor=h.timeout_factor,
            initial_velocity_ratio=h.initial_velocity_ratio,
            sensor=Sensor(h.sensor),
        )

    def experiments(self) -> list[Experiment]:
        """One descriptor per run: the full mode x plate grid in suite mode."""
        if not self.suite:
            return [self.experiment()]
        return [self.experiment(m, t) for t in sorted(STANDARD_PLATES) for m in SUITE_MODES]

    def to_dict(self) -> dict[str, Any]:
        plate = {k: v for k, v in asdict(self.plate).items() if v is not None}
        return {
            "seed": self.seed,
            "suite": self.suite,
            "mode": self.mode,
            "v_const": self.v_const,
            "plate": plate,
            "controller": asdict(self.controller),
            "references": {"c_star": self.c_star, "i_star": self.i_star},
            "lambda": self.lam,
            "intensity": asdict(self.intensity),
            "vision": {"cutoffs": list(self.cutoffs), "distance_exponent": self.distance_exponent},
            "noise": asdict(self.noise),
            "harness": asdict(self.harness),
            "output": {"dir": self.out_dir, "dump_frames": self.dump_frames},
        }


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


_SECTIONS = {"seed", "suite", "mode", "v_const", "plate", "controller", "references", "lambda",
             "intensity", "vision", "noise", "harness", "output"}


def _section(raw: dict, name: str, allowed) -> dict:
    sec = raw.get(name)
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigValidationError(f"{name}: expected a mapping")
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        raise ConfigValidationError(f"{name}: unknown key(s) {', '.join(map(str, unknown))}")
    return sec


def _names(cls) -> list[str]:
    return [f.name for f in fields(cls)]


def _number(section: str, key: str, value, kind=float):
    name = section if section == key else f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(f"{name} must be a number")
    if kind is int and value != int(value):
        raise ConfigValidationError(f"{name} must be an integer")
    return kind(value)


def _build(section: str, cls, values: dict, types: dict | None = None):
    types = types or {}
    kwargs = {}
    for k, v in values.items():
        t = types.get(k, float)
        if t is bool:
            if not isinstance(v, bool):
                raise ConfigValidationError(f"{section}.{k} must be true or false")
            kwargs[k] = v
        elif t is str:
            kwargs[k] = str(v)
        elif v is None and t == "optional":
            kwargs[k] = None
        else:
            kwargs[k] = _number(section, k, v, int if t is int else float)
    try:
        return cls(**kwargs)
    except InvalidInputError as exc:
        raise ConfigValidationError(f"{section}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    """Validate a YAML document and fill in defaults."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise ConfigParseError(problem, mark.line + 1, mark.column + 1) from exc
        raise ConfigParseError(problem) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigValidationError("top level must be a mapping")
    unknown = sorted(set(map(str, raw)) - _SECTIONS)
    if unknown:
        raise ConfigValidationError(f"unknown key(s) {', '.join(unknown)}")

    refs = _section(raw, "references", ["c_star", "i_star"])
    c_star = _number("references", "c_star", refs.get("c_star", C_STAR))
    i_star = _number("references", "i_star", refs.get("i_star", I_STAR))
    if not (0 < c_star <= 1 and 0 < i_star <= 1):
        raise ConfigValidationError("references: c_star and i_star must lie in (0, 1]")
    lam = _number("lambda", "lambda", raw.get("lambda", LAMBDA))
    if not 0 <= lam <= 1:
        raise ConfigValidationError("lambda must lie in [0, 1]")

    ctrl = dict(_section(raw, "controller", _names(ControllerParams)))
    ctrl.setdefault("desired_state", lam * c_star + (1 - lam) * i_star)
    controller = _build("controller", ControllerParams, ctrl)

    plate_vals = _section(raw, "plate", _names(PlateConfig))
    plate = _build(
        "plate", PlateConfig, plate_vals,
        {k: "optional" for k in ("v_star", "tau", "reseal_rate", "cut_gain")},
    )
    intensity = _build("intensity", IntensityParams, _section(raw, "intensity", _names(IntensityParams)))
    noise = _build(
        "noise", NoiseConfig, _section(raw, "noise", _names(NoiseConfig)),
        {"enabled": bool, "trail": bool, "spark_max": int},
    )
    harness = _build(
        "harness", HarnessConfig, _section(raw, "harness", _names(HarnessConfig)),
        {"calibration_frames": int, "hold_steps": int, "sensor": str},
    )

    vision = _section(raw, "vision", ["cutoffs", "distance_exponent"])
    cutoffs = vision.get("cutoffs", list(DEFAULT_CUTOFFS))
    if not isinstance(cutoffs, list) or len(cutoffs) != 3:
        raise ConfigValidationError("vision.cutoffs must be a list of three integers")
    cutoffs = tuple(_number("vision", "cutoffs", c, int) for c in cutoffs)
    if not all(1 <= c <= 255 for c in cutoffs):
        raise ConfigValidationError("vision.cutoffs must lie in 1..255")
    distance_exponent = _number("vision", "distance_exponent", vision.get("distance_exponent", 1.0))
    if distance_exponent < 0:
        raise ConfigValidationError("vision.distance_exponent must be >= 0")

    output = _section(raw, "output", ["dir", "dump_frames"])
    dump_frames = output.get("dump_frames", False)
    if not isinstance(dump_frames, bool):
        raise ConfigValidationError("output.dump_frames must be true or false")

    seed = _number("seed", "seed", raw.get("seed", 0), int)
    suite = raw.get("suite", False)
    if not isinstance(suite, bool):
        raise ConfigValidationError("suite must be true or false")
    mode = str(raw.get("mode", Mode.CONTROLLED.value))
    if mode not in {m.value for m in Mode}:
        raise ConfigValidationError(f"mode must be one of {', '.join(m.value for m in Mode)}")
    v_const = raw.get("v_const")
    if v_const is not None:
        v_const = _number("v_const", "v_const", v_const)

    cfg = RunConfig(
        seed=seed,
        suite=suite,
        mode=mode,
        v_const=v_const,
        plate=plate,
        controller=controller,
        c_star=c_star,
        i_star=i_star,
        lam=lam,
        intensity=intensity,
        cutoffs=cutoffs,
        distance_exponent=distance_exponent,
        noise=noise,
        harness=harness,
        out_dir=str(output.get("dir", "out")),
        dump_frames=dump_frames,
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Build every run descriptor so that cross-field problems surface at load time."""
    if cfg.harness.sensor not in {s.value for s in Sensor}:
        raise ConfigValidationError(f"harness.sensor must be one of {', '.join(s.value for s in Sensor)}")
    try:
        cfg.experiments()
    except InvalidInputError as exc:
        raise ConfigValidationError(str(exc)) from exc


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Load and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return parse_config("")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigValidationError(f"{path}: {exc.strerror}") from exc
    return parse_config(text)


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    """Copy with the given top-level fields replaced, revalidated."""
    out = replace(cfg, **{k: v for k, v in changes.items() if v is not None})
    validate(out)
    return out
