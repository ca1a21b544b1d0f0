"""Robot description and the shipped default configuration.

The nominal mass, standing height and controller settings follow the A1
experiments the package reproduces. The lumped body inertia and the hip
geometry are *assumed* values (the source gives neither).
"""
from dataclasses import dataclass, fields, is_dataclass
import json
from importlib import resources

import numpy as np

from .srb import InertialParams

GRAVITY = np.array([0.0, 0.0, 9.81])


@dataclass(frozen=True)
class RobotConfig:
    mass: float = 12.45
    inertia_diag: tuple = (0.07, 0.26, 0.242)
    nominal_height: float = 0.26
    # hip positions in the body frame, order FR, FL, RR, RL
    hip_offsets: tuple = ((0.183, -0.13, 0.0), (0.183, 0.13, 0.0),
                          (-0.183, -0.13, 0.0), (-0.183, 0.13, 0.0))

    @property
    def params(self):
        return InertialParams(self.mass, np.diag(self.inertia_diag))

    @property
    def hips(self):
        return np.array(self.hip_offsets, dtype=float)


def load_defaults():
    text = resources.files("ampc_lab").joinpath("defaults.json").read_text()
    return json.loads(text)


def to_jsonable(obj):
    if is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _coerce(value, default):
    if isinstance(default, tuple):
        if default and isinstance(default[0], tuple):
            return tuple(tuple(float(x) for x in row) for row in value)
        return tuple(value)
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, int) and not isinstance(default, bool):
        return int(value)
    return value


def from_dict(cls, data):
    """Build dataclass ``cls`` from a dict, rejecting unknown keys."""
    data = dict(data or {})
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise KeyError(f"unknown {cls.__name__} keys {unknown}; valid keys: {sorted(names)}")
    defaults = cls()
    kwargs = {k: _coerce(v, getattr(defaults, k)) for k, v in data.items()}
    return cls(**kwargs)
