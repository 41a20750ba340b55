"""Simulated human operator for the open-loop rocking strategies.

The operator superimposes the strategy's oscillation on a slowly drifting
"centre" tilt.  The centre yields to the felt lateral reaction (theta_x to
F_y, theta_y to F_x).  Along the axes the strategy actively rocks, the
yield is unlimited; along the other axes the grip gives only passively, up
to a bounded deflection.  The oscillation shrinks linearly with depth so
the sweep narrows with the socket.
"""

from __future__ import annotations

from dataclasses import dataclass

from .contact import Wrench
from .control import OscillationParams, StrategyKind, open_loop_command
from .pose import TiltPair


@dataclass(frozen=True)
class OperatorParams:
    yield_rate: float = 0.1        # deg/(N s)
    passive_limit_x: float = 4.5   # deg, theta_x give when not rocking about x
    passive_limit_y: float = 2.5   # deg
    active_limit: float = 20.0     # deg

    def __post_init__(self):
        if self.yield_rate < 0:
            raise ValueError("yield_rate must be non-negative")
        if min(self.passive_limit_x, self.passive_limit_y, self.active_limit) < 0:
            raise ValueError("limits must be non-negative")


def _clamp(v, lim):
    return max(-lim, min(lim, v))


class HumanOperator:
    def __init__(self, kind: StrategyKind, osc: OscillationParams,
                 params: OperatorParams = OperatorParams()):
        osc.validate_for(kind)
        self.kind = kind
        self.osc = osc
        self.params = params
        self.cx = 0.0
        self.cy = 0.0
        self.lim_x = params.active_limit if kind.moves_x else params.passive_limit_x
        self.lim_y = params.active_limit if kind.moves_y else params.passive_limit_y

    def command(self, t: float, depth_fraction: float) -> TiltPair:
        scale = max(0.0, 1.0 - depth_fraction)
        o = open_loop_command(self.kind, self.osc, t)
        return TiltPair(self.cx + scale * o.theta_x, self.cy + scale * o.theta_y)

    def feel(self, sample: Wrench, dt: float) -> None:
        g = self.params.yield_rate * dt
        self.cx = _clamp(self.cx + g * sample[1], self.lim_x)
        self.cy = _clamp(self.cy + g * sample[0], self.lim_y)

    @property
    def centre(self) -> TiltPair:
        return TiltPair(self.cx, self.cy)
