"""Insertion strategies and the second-order force-to-tilt plug-in controller.

Angles are in degrees at the interface; the per-axis ODE

    theta'' + 2 zeta wn theta' + wn^2 theta = K wn^2 F

is integrated exactly over each step with the force held constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from .contact import MotionCommand, Wrench
from .pose import TiltPair


class ConfigurationError(ValueError):
    pass


class StrategyKind(str, Enum):
    LR = "LR"
    UD = "UD"
    SP = "SP"
    STRAIGHT_BACK = "StraightBack"

    @classmethod
    def parse(cls, text: str) -> "StrategyKind":
        key = text.strip().lower().replace("_", "").replace("-", "")
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        if key in ("straight", "sb"):
            return cls.STRAIGHT_BACK
        raise ValueError(f"unknown strategy {text!r}")

    @property
    def moves_x(self) -> bool:
        return self in (StrategyKind.LR, StrategyKind.SP)

    @property
    def moves_y(self) -> bool:
        return self in (StrategyKind.UD, StrategyKind.SP)


@dataclass(frozen=True)
class OscillationParams:
    amplitude_x: float = 4.75   # deg
    amplitude_y: float = 3.4    # deg
    period: float = 0.52        # s
    phase_offset: float = 90.0  # deg, theta_y leads theta_x

    def __post_init__(self):
        if self.amplitude_x < 0 or self.amplitude_y < 0:
            raise ValueError("amplitudes must be non-negative")
        if not self.period > 0:
            raise ValueError("period must be positive")

    def validate_for(self, kind: StrategyKind) -> None:
        if kind is StrategyKind.SP:
            if not (self.amplitude_x > 0 and self.amplitude_y > 0):
                raise ValueError("spiral needs both amplitudes > 0")
            if self.phase_offset != 90.0:
                raise ValueError("spiral needs a 90 deg phase offset")


def open_loop_command(kind: StrategyKind, p: OscillationParams, t: float) -> TiltPair:
    """Tilt offset of a human-style rocking pattern at time ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    w = 2.0 * math.pi * t / p.period
    if kind is StrategyKind.LR:
        return TiltPair(p.amplitude_x * math.sin(w), 0.0)
    if kind is StrategyKind.UD:
        return TiltPair(0.0, p.amplitude_y * math.sin(w))
    if kind is StrategyKind.SP:
        return TiltPair(p.amplitude_x * math.sin(w),
                        p.amplitude_y * math.sin(w + math.radians(p.phase_offset)))
    return TiltPair(0.0, 0.0)


@dataclass(frozen=True)
class SecondOrderParams:
    gain: float            # deg/N
    omega_n: float         # rad/s
    zeta: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.gain):
            raise ValueError("gain must be finite")
        if not (self.omega_n > 0 and self.zeta > 0):
            raise ValueError("omega_n and zeta must be positive")

    @property
    def max_dt(self) -> float:
        return 1.0 / (10.0 * self.omega_n)


class AxisState(NamedTuple):
    theta: float = 0.0      # deg
    theta_dot: float = 0.0  # deg/s


@lru_cache(maxsize=256)
def _discretize(omega_n: float, zeta: float, gain: float, dt: float):
    # zero-order-hold discretisation via the augmented matrix exponential
    m = np.zeros((3, 3))
    m[0, 1] = 1.0
    m[1, 0] = -omega_n ** 2
    m[1, 1] = -2.0 * zeta * omega_n
    m[1, 2] = gain * omega_n ** 2
    e = expm(m * dt)
    return (float(e[0, 0]), float(e[0, 1]), float(e[1, 0]), float(e[1, 1]),
            float(e[0, 2]), float(e[1, 2]))


def second_order_step(p: SecondOrderParams, state: AxisState, input_force: float,
                      dt: float, method: str = "exact") -> AxisState:
    """One step of the force-to-tilt ODE with ``input_force`` held over ``dt``.

    ``method="exact"`` is the ZOH solution; ``"heun"`` is the explicit
    second-order Runge-Kutta scheme, kept as a cross-check.
    """
    if not dt > 0 or dt > p.max_dt * (1 + 1e-12):
        raise ValueError(f"dt must be in (0, {p.max_dt:.6g}] for omega_n={p.omega_n}")
    if method == "exact":
        a00, a01, a10, a11, b0, b1 = _discretize(p.omega_n, p.zeta, p.gain, dt)
        th, om = state
        return AxisState(a00 * th + a01 * om + b0 * input_force,
                         a10 * th + a11 * om + b1 * input_force)
    if method == "heun":
        wn2 = p.omega_n ** 2
        c = 2.0 * p.zeta * p.omega_n
        u = p.gain * wn2 * input_force

        def f(th, om):
            return om, u - c * om - wn2 * th

        th, om = state
        k1 = f(th, om)
        k2 = f(th + dt * k1[0], om + dt * k1[1])
        return AxisState(th + 0.5 * dt * (k1[0] + k2[0]), om + 0.5 * dt * (k1[1] + k2[1]))
    raise ValueError(f"unknown integration method {method!r}")


def critically_damped_step(gain: float, omega_n: float, t):
    """Closed-form response to a unit force step from rest with zeta = 1."""
    t = np.asarray(t, dtype=float)
    return gain * (1.0 - (1.0 + omega_n * t) * np.exp(-omega_n * t))


@dataclass(frozen=True)
class ControllerGains:
    """Plug-in controller parameters.

    ``k_lr`` drives the theta_y axis from F_x and ``k_ud`` the theta_x axis
    from F_y; the names follow the axis pairing, not the human strategy
    names.
    """

    k_lr: float
    k_ud: float
    v_const: float = 10.0        # mm/s
    f_z_plugin: float = -81.6    # N
    f_z_plugout: float = 75.6    # N
    t_s: float = 0.26            # s
    zeta: float = 1.0
    push_force: float = 60.0     # N

    def __post_init__(self):
        if not self.f_z_plugin < 0 < self.f_z_plugout:
            raise ConfigurationError("need f_z_plugin < 0 < f_z_plugout")
        if not self.t_s > 0 or not self.v_const > 0 or not self.zeta > 0:
            raise ConfigurationError("t_s, v_const and zeta must be positive")

    @property
    def omega_n(self) -> float:
        return 4.0 / (self.zeta * self.t_s)

    def axis_params(self) -> tuple[SecondOrderParams, SecondOrderParams]:
        """(theta_x axis driven by F_y, theta_y axis driven by F_x)."""
        return (SecondOrderParams(self.k_ud, self.omega_n, self.zeta),
                SecondOrderParams(self.k_lr, self.omega_n, self.zeta))


GAIN_CONVENTIONS = ("deg_per_N", "N_per_deg")


def controller_init(stats, v_const: float = 10.0, gain_convention: str = "deg_per_N",
                    push_force: float = 60.0) -> ControllerGains:
    """Derive controller gains from measured human wave statistics.

    ``stats`` needs ``d_theta_x, d_theta_y, d_fx, d_fy, f_z_plugin,
    f_z_plugout, t_response``.  Under ``"deg_per_N"`` the gains are angle per
    force, which is what the ODE's steady state ``theta = K F`` needs.
    ``"N_per_deg"`` takes the reciprocal, force per angle.
    """
    if not stats.t_response > 0:
        raise ConfigurationError("t_response must be positive")
    for name in ("d_theta_x", "d_theta_y", "d_fx", "d_fy"):
        if not getattr(stats, name) > 0:
            raise ConfigurationError(f"{name} must be positive")
    if gain_convention == "deg_per_N":
        k_lr = stats.d_theta_y / stats.d_fx
        k_ud = stats.d_theta_x / stats.d_fy
    elif gain_convention == "N_per_deg":
        k_lr = stats.d_fx / stats.d_theta_y
        k_ud = stats.d_fy / stats.d_theta_x
    else:
        raise ConfigurationError(f"gain_convention must be one of {GAIN_CONVENTIONS}")
    return ControllerGains(k_lr=k_lr, k_ud=k_ud, v_const=v_const,
                           f_z_plugin=stats.f_z_plugin, f_z_plugout=stats.f_z_plugout,
                           t_s=stats.t_response, zeta=1.0, push_force=push_force)


class Axes(NamedTuple):
    x: AxisState = AxisState()  # theta_x, driven by F_y
    y: AxisState = AxisState()  # theta_y, driven by F_x


def _substeps(p: SecondOrderParams, dt: float) -> int:
    return max(1, math.ceil(dt / p.max_dt - 1e-9))


def advance_axes(sys: tuple[SecondOrderParams, SecondOrderParams], axes: Axes,
                 sample: Wrench, dt: float, method: str = "exact") -> Axes:
    px, py = sys
    n = max(_substeps(px, dt), _substeps(py, dt))
    h = dt / n
    x, y = axes
    for _ in range(n):
        x = second_order_step(px, x, sample[1], h, method)
        y = second_order_step(py, y, sample[0], h, method)
    return Axes(x, y)


def plugin_step(g: ControllerGains, sys, axes: Axes, sample: Wrench,
                dt: float) -> tuple[Axes, MotionCommand]:
    """One control period: theta_x follows F_y, theta_y follows F_x.

    ``dt`` may exceed the ODE resolution limit; it is split into equal
    sub-steps.  The returned ``axes`` double as the retained old values.
    """
    new = advance_axes(sys, axes, sample, dt)
    cmd = MotionCommand(TiltPair(new.x.theta, new.y.theta), g.v_const, g.push_force)
    return new, cmd


def plugin_terminated(sample: Wrench, g: ControllerGains) -> bool:
    return not sample[2] > g.f_z_plugin


def frozen_command(axes: Axes, g: ControllerGains, v_z: float = 0.0) -> MotionCommand:
    return MotionCommand(TiltPair(axes.x.theta, axes.y.theta), v_z, g.push_force)


def plugout_step(g: ControllerGains, frozen: TiltPair, t: float,
                 mode: StrategyKind = StrategyKind.STRAIGHT_BACK,
                 osc: OscillationParams | None = None,
                 scale: float = 1.0) -> MotionCommand:
    """Extraction command: back out at ``v_const`` holding the final tilt.

    With ``mode=SP`` a spiral of relative size ``scale`` is superimposed on
    the frozen tilt.
    """
    tx, ty = frozen
    if mode is not StrategyKind.STRAIGHT_BACK:
        o = open_loop_command(mode, osc or OscillationParams(), t)
        tx += scale * o.theta_x
        ty += scale * o.theta_y
    return MotionCommand(TiltPair(tx, ty), -g.v_const, g.push_force)


def plugout_terminated(sample: Wrench, g: ControllerGains, depth: float) -> bool:
    """Charger is out: depth zero and the extraction force has let go."""
    return depth <= 0.0 and sample[2] < g.f_z_plugout
