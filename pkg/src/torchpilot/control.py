"""Proportional acceleration law on the combustion-state error."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidInputError


@dataclass(frozen=True)
class ControllerParams:
    gain: float = 200.0
    desired_state: float = 0.6
    v_max: float = 2.0  # cm/s
    a_max: float = 0.8  # cm/s^2
    dt: float = 0.05  # s

    def __post_init__(self):
        if not self.gain > 0:
            raise InvalidInputError("gain must be > 0")
        if not 0 < self.desired_state <= 1:
            raise InvalidInputError("desired_state must lie in (0, 1]")
        if not self.v_max > 0:
            raise InvalidInputError("v_max must be > 0")
        if not self.a_max > 0:
            raise InvalidInputError("a_max must be > 0")
        if not self.dt > 0:
            raise InvalidInputError("dt must be > 0")


def state_error(s_star: float, s: float) -> float:
    return s_star - s


def control_accel(e_s: float, params: ControllerParams) -> float:
    """Commanded acceleration ``-k * e_s`` limited to ``+-a_max``.

    A deficient state (positive error) slows the torch down, an excessive
    one speeds it up.
    """
    a = -params.gain * e_s
    return min(max(a, -params.a_max), params.a_max)


def apply_velocity_update(v: float, accel: float, params: ControllerParams) -> float:
    """Zero-order-hold Euler update, clamped to ``[0, v_max]``."""
    return min(max(v + accel * params.dt, 0.0), params.v_max)


def lyapunov(e_s: float) -> float:
    return 0.5 * e_s * e_s
