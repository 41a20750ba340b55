"""Campaign configuration: defaults, TOML loading and dumping.

Sections: ``[socket]``, ``[sensor]``, ``[controller]``, ``[strategy]``,
``[operator]`` and ``[campaign]``.  Missing keys fall back to the built-in
defaults; unknown keys are rejected.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .contact import SensorModel, SocketModel, Wrench
from .control import GAIN_CONVENTIONS, OscillationParams, StrategyKind
from .operator import OperatorParams

CONFIG_ENV = "EVPLUG_CONFIG"
CLOSED_LOOP = "Admittance"
STRATEGIES = ("LR", "UD", "SP", "StraightBack", CLOSED_LOOP)


class ConfigError(ValueError):
    pass


def parse_strategy(text: str) -> str:
    key = str(text).strip().lower()
    if key in ("admittance", "closed", "closed_loop", "closedloop", "controller"):
        return CLOSED_LOOP
    try:
        return StrategyKind.parse(text).value
    except ValueError:
        raise ConfigError(f"unknown strategy {text!r}; choose from {', '.join(STRATEGIES)}") from None


@dataclass(frozen=True)
class ControllerSettings:
    """Human wave statistics the controller is derived from, plus run settings."""

    d_theta_x: float = 9.5
    d_theta_y: float = 6.8
    d_fx: float = 27.7
    d_fy: float = 32.6
    f_z_plugin: float = -81.6
    f_z_plugout: float = 75.6
    t_response: float = 0.26
    v_const: float = 10.0
    push_force: float = 60.0
    gain_convention: str = "deg_per_N"
    plugout_mode: str = "StraightBack"

    def __post_init__(self):
        if self.gain_convention not in GAIN_CONVENTIONS:
            raise ConfigError(f"gain_convention must be one of {GAIN_CONVENTIONS}")
        object.__setattr__(self, "plugout_mode", StrategyKind.parse(self.plugout_mode).value)
        if not self.v_const > 0 or not self.push_force > 0:
            raise ConfigError("v_const and push_force must be positive")


@dataclass(frozen=True)
class CampaignSettings:
    strategies: tuple[str, ...] = ("LR", "UD", "SP", CLOSED_LOOP)
    trials: int = 200
    base_seed: int = 0
    max_error: float = 10.0
    timeout: float = 30.0
    dt_control: float = 0.01
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(parse_strategy(s) for s in self.strategies))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (self.timeout > 0 and self.dt_control > 0 and self.max_error > 0):
            raise ConfigError("timeout, dt_control and max_error must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class Config:
    socket: SocketModel = field(default_factory=SocketModel)
    sensor: SensorModel = field(default_factory=SensorModel)
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    strategy: OscillationParams = field(default_factory=OscillationParams)
    operator: OperatorParams = field(default_factory=OperatorParams)
    campaign: CampaignSettings = field(default_factory=CampaignSettings)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            section = asdict(getattr(self, f.name))
            if f.name == "sensor":
                section["bias"] = list(section["bias"])
            if f.name == "campaign":
                section["strategies"] = list(section["strategies"])
            out[f.name] = section
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        kwargs = {}
        known = {f.name: f for f in fields(cls)}
        for name, section in data.items():
            if name not in known:
                raise ConfigError(f"unknown config section [{name}]")
            if not isinstance(section, dict):
                raise ConfigError(f"[{name}] must be a table")
            target = known[name].default_factory()
            allowed = {f.name for f in fields(target)}
            extra = set(section) - allowed
            if extra:
                raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
            values = dict(section)
            if name == "sensor" and "bias" in values:
                values["bias"] = Wrench(*values["bias"])
            if name == "campaign" and "strategies" in values:
                values["strategies"] = tuple(values["strategies"])
            try:
                kwargs[name] = replace(target, **values)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{name}]: {exc}") from None
        return cls(**kwargs)


def load_config(path=None) -> Config:
    """Load ``path``; ``None`` or ``"default"`` uses $EVPLUG_CONFIG or built-ins."""
    if path in (None, "default"):
        env = os.environ.get(CONFIG_ENV)
        if path is None and env:
            path = env
        else:
            return Config()
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {p}: {exc}") from None
    return Config.from_dict(data)


def dump_config(cfg: Config) -> str:
    return tomli_w.dumps(cfg.to_dict())
