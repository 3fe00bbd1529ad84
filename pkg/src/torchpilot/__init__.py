"""Vision-guided speed control for oxy-fuel torch cutting, with a synthetic plant."""

from .control import ControllerParams, apply_velocity_update, control_accel, lyapunov, state_error
from .errors import TorchPilotError
from .features import Calibration, IntensityParams, PoolFeatures, calibrate, measure
from .harness import Experiment, Mode, Phase, RunResult, run_constant_speed, run_experiment, success_ratio
from .imgproc import Color, Contour, QuantizedImage, RgbImage, extract_contours, quantize
from .plant import PlantState, PlateSpec, phi, render, step

__version__ = "0.1.0"

__all__ = [
    "Calibration", "Color", "Contour", "ControllerParams", "Experiment", "IntensityParams", "Mode",
    "Phase", "PlantState", "PlateSpec", "PoolFeatures", "QuantizedImage", "RgbImage", "RunResult",
    "TorchPilotError", "apply_velocity_update", "calibrate", "control_accel", "extract_contours",
    "lyapunov", "measure", "phi", "quantize", "render", "run_constant_speed", "run_experiment",
    "state_error", "step", "success_ratio",
]
