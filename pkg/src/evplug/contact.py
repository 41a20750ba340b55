"""Quasi-static insertion model of a type-2 plug in its socket.

The pins and housing are abstracted into a single admissible tilt cone that
narrows linearly from the chamfer (``capture_cone``) at the mouth to the
running clearance (``clearance_cone``) at full depth.  Forces are the
reaction on the charger, expressed in the charger frame:

* sliding in the cone: axial friction ``-k_fric * v_z`` plus a lateral
  restoring force growing with depth (theta_x couples to F_y, theta_y to F_x);
* tilt outside the cone: the wall holds the charger on the cone surface and
  pushes back with a stiff jam reaction on the excess tilt.  Wall friction
  adds to the axial drag, so the plug keeps sliding only while the push
  budget covers it; past that point it wedges and F_z reads the full push;
* reaching or leaving the seat adds a one-step detent spike.

Positive ``v_z`` inserts.  The model has no inertia and no actuator lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .pose import TiltPair

FORCE_RANGE = 150.0   # N
TORQUE_RANGE = 15.0   # Nm
SAMPLE_RATE = 100.0   # Hz


class Wrench(NamedTuple):
    fx: float = 0.0
    fy: float = 0.0
    fz: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    def __add__(self, other):  # element-wise, not tuple concatenation
        return Wrench(*(a + b for a, b in zip(self, other)))

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self)


class ContactPhase(str, Enum):
    FREE = "free"
    ENGAGED = "engaged"
    SEATED = "seated"


@dataclass(frozen=True)
class SocketModel:
    full_depth: float = 30.0          # mm
    capture_cone: float = 6.0         # deg, admissible total tilt at the mouth
    clearance_cone: float = 1.0       # deg, admissible total tilt when seated
    lateral_stiffness: float = 6.0    # N/deg at full depth
    jam_stiffness: float = 30.0       # N/deg of excess tilt
    sliding_resistance: float = 4.0   # N s/mm
    seat_detent: float = 45.0         # N
    wall_friction: float = 0.4        # axial drag per N of wall load
    torque_arm: float = 0.12          # m, sensor to plug face

    def __post_init__(self):
        if not self.full_depth > 0:
            raise ValueError("full_depth must be positive")
        if not self.capture_cone > self.clearance_cone > 0:
            raise ValueError("need capture_cone > clearance_cone > 0")
        for name in ("lateral_stiffness", "jam_stiffness", "sliding_resistance",
                     "wall_friction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.seat_detent < 0 or self.torque_arm < 0:
            raise ValueError("seat_detent and torque_arm must be non-negative")

    def allowed_tilt(self, depth: float) -> float:
        frac = depth / self.full_depth
        return self.capture_cone + (self.clearance_cone - self.capture_cone) * frac

    def depth_limit(self, total_tilt: float) -> float:
        """Deepest depth at which ``total_tilt`` is still admissible (may be < 0)."""
        if total_tilt <= self.clearance_cone:
            return self.full_depth
        span = self.capture_cone - self.clearance_cone
        return self.full_depth * (self.capture_cone - total_tilt) / span


@dataclass(frozen=True)
class ContactState:
    depth: float = 0.0
    tilt: TiltPair = TiltPair(0.0, 0.0)
    phase: ContactPhase = ContactPhase.FREE
    t: float = 0.0

    @classmethod
    def at(cls, socket: SocketModel, depth: float, tilt=(0.0, 0.0), t: float = 0.0):
        if not 0.0 <= depth <= socket.full_depth:
            raise ValueError("depth outside [0, full_depth]")
        return cls(depth, TiltPair(*tilt), phase_for(socket, depth), t)


def phase_for(socket: SocketModel, depth: float) -> ContactPhase:
    if depth >= socket.full_depth:
        return ContactPhase.SEATED
    if depth <= 0.0:
        return ContactPhase.FREE
    return ContactPhase.ENGAGED


@dataclass(frozen=True)
class MotionCommand:
    tilt_setpoint: TiltPair = TiltPair(0.0, 0.0)
    v_z: float = 0.0          # mm/s, + inserts
    push_force: float = 60.0  # N available against a jam

    def __post_init__(self):
        if not self.push_force > 0:
            raise ValueError("push_force must be positive")


def step(socket: SocketModel, state: ContactState, cmd: MotionCommand,
         dt: float) -> tuple[ContactState, Wrench]:
    """Advance the contact by ``dt`` seconds under ``cmd``.

    The charger tilt follows the setpoint except where the socket wall
    holds it inside the cone.  Sliding with the wall loaded costs
    ``wall_friction * F_wall`` extra axial force; once that plus the sliding
    resistance would exceed the push budget the plug wedges and stops.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    full = socket.full_depth
    tx, ty = float(cmd.tilt_setpoint[0]), float(cmd.tilt_setpoint[1])
    total = math.hypot(tx, ty)
    d0 = state.depth
    v = cmd.v_z
    push = cmd.push_force
    k_jam, mu = socket.jam_stiffness, socket.wall_friction

    def wall(depth):
        return k_jam * max(0.0, total - socket.allowed_tilt(depth))

    d1 = d0
    fz = 0.0
    if v > 0.0:
        slide = socket.sliding_resistance * v
        if d0 >= full:
            fz = -push
        else:
            tol = (push - slide) / (mu * k_jam)
            limit = socket.depth_limit(total - tol) if tol > 0 else -1.0
            d1 = min(full, d0 + v * dt, max(d0, limit))
            if d1 > d0:
                fz = -(slide + mu * wall(d1))
                if d1 >= full:
                    d1 = full
                    fz -= socket.seat_detent
            else:
                fz = -push
    elif v < 0.0 and d0 > 0.0:
        slide = socket.sliding_resistance * (-v)
        if slide + mu * wall(d0) <= push:
            d1 = max(0.0, d0 + v * dt)
            fz = slide + mu * wall(d1)
            if d0 >= full:
                fz += socket.seat_detent
        else:
            fz = push

    fx = fy = 0.0
    ax, ay = tx, ty
    if d0 > 0.0 or v > 0.0:
        f_wall = wall(d1) if (d1 > 0.0 or v > 0.0) else 0.0
        if f_wall > 0.0 and d1 > 0.0:
            # the walls hold the charger on the cone surface
            shrink = socket.allowed_tilt(d1) / total
            ax, ay = tx * shrink, ty * shrink
        frac = d1 / full
        fy = -socket.lateral_stiffness * ax * frac
        fx = -socket.lateral_stiffness * ay * frac
        if f_wall > 0.0:
            fy -= f_wall * tx / total
            fx -= f_wall * ty / total

    arm = socket.torque_arm
    wrench = Wrench(fx, fy, fz, -arm * fy, arm * fx, 0.0)
    new_state = ContactState(d1, TiltPair(ax, ay), phase_for(socket, d1), state.t + dt)
    return new_state, wrench


def is_seated(state: ContactState, socket: SocketModel | None = None) -> bool:
    if socket is not None:
        return state.depth >= socket.full_depth
    return state.phase is ContactPhase.SEATED


def is_free(state: ContactState) -> bool:
    return state.depth <= 0.0


@dataclass(frozen=True)
class SensorModel:
    """Six-axis FT sensor: bias, white Gaussian noise, hard saturation."""

    noise_sigma_force: float = 0.5
    noise_sigma_torque: float = 0.02
    bias: Wrench = field(default_factory=Wrench)
    force_range: float = FORCE_RANGE
    torque_range: float = TORQUE_RANGE
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self):
        if self.noise_sigma_force < 0 or self.noise_sigma_torque < 0:
            raise ValueError("noise sigmas must be non-negative")
        if (self.force_range != FORCE_RANGE or self.torque_range != TORQUE_RANGE
                or self.sample_rate != SAMPLE_RATE):
            raise ValueError("sensor ranges and rate are fixed to the 150 N / 15 Nm / 100 Hz unit")
        object.__setattr__(self, "bias", Wrench(*self.bias))

    @property
    def period(self) -> float:
        return 1.0 / self.sample_rate


def _clip(v: float, lim: float) -> float:
    return -lim if v < -lim else (lim if v > lim else v)


def sample_sensor(sensor: SensorModel, w: Wrench, rng: np.random.Generator) -> Wrench:
    sf, st = sensor.noise_sigma_force, sensor.noise_sigma_torque
    noise = rng.standard_normal(6) if (sf or st) else np.zeros(6)
    b = sensor.bias
    fr, tr = sensor.force_range, sensor.torque_range
    return Wrench(
        _clip(w[0] + b[0] + sf * noise[0], fr),
        _clip(w[1] + b[1] + sf * noise[1], fr),
        _clip(w[2] + b[2] + sf * noise[2], fr),
        _clip(w[3] + b[3] + st * noise[3], tr),
        _clip(w[4] + b[4] + st * noise[4], tr),
        _clip(w[5] + b[5] + st * noise[5], tr),
    )


def sample_initial_error(rng: np.random.Generator, max_total: float = 10.0) -> TiltPair:
    """Random signed misalignment: uniform direction, magnitude uniform on [0, max_total)."""
    if not max_total > 0:
        raise ValueError("max_total must be positive")
    mag = rng.uniform(0.0, max_total)
    ang = rng.uniform(0.0, 2.0 * math.pi)
    return TiltPair(mag * math.cos(ang), mag * math.sin(ang))


def with_depth(state: ContactState, socket: SocketModel, depth: float) -> ContactState:
    return replace(state, depth=depth, phase=phase_for(socket, depth))
