"""Nonlinear single-rigid-body plant and inertial bookkeeping.

The body is driven by up to four point contact forces expressed in the world
frame. Translational states live in the world frame, the angular velocity in
the body frame, and the attitude is a body-to-world rotation matrix.
"""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .rotations import expm_so3, polar_project, right_jacobian_inv, skew

N_FEET = 4
ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class InertialParams:
    mass: float
    inertia: np.ndarray

    def __post_init__(self):
        inertia = np.array(self.inertia, dtype=float).reshape(3, 3)
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise ValueError(f"mass must be positive and finite, got {self.mass}")
        if not np.all(np.isfinite(inertia)):
            raise ValueError("inertia must be finite")
        if np.max(np.abs(inertia - inertia.T)) > 1e-12:
            raise ValueError("inertia must be symmetric")
        if np.linalg.eigvalsh(inertia)[0] <= 0:
            raise ValueError("inertia must be positive definite")
        inertia.setflags(write=False)
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "inertia", inertia)

    @property
    def inv_inertia(self):
        return np.linalg.inv(self.inertia)


@dataclass
class RigidBodyState:
    r: np.ndarray
    v: np.ndarray
    R: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.r = np.array(self.r, dtype=float).reshape(3)
        self.v = np.array(self.v, dtype=float).reshape(3)
        self.R = np.array(self.R, dtype=float).reshape(3, 3)
        self.omega = np.array(self.omega, dtype=float).reshape(3)
        for name in ("r", "v", "R", "omega"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in state.{name}")
        if np.linalg.norm(self.R.T @ self.R - np.eye(3)) > ORTHO_TOL:
            raise ValueError("state.R is not orthonormal")
        if abs(np.linalg.det(self.R) - 1.0) > ORTHO_TOL:
            raise ValueError("state.R is not a proper rotation")

    def copy(self):
        return RigidBodyState(self.r.copy(), self.v.copy(), self.R.copy(), self.omega.copy())


@dataclass
class FootSet:
    """World-frame foot positions (FR, FL, RR, RL) and their stance flags."""

    positions: np.ndarray
    stance: np.ndarray = field(default_factory=lambda: np.ones(N_FEET, dtype=bool))

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(N_FEET, 3)
        self.stance = np.array(self.stance, dtype=bool).reshape(N_FEET)


@dataclass(frozen=True)
class PayloadSpec:
    mass: float
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    own_inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        offset = np.array(self.offset, dtype=float).reshape(3)
        own = np.array(self.own_inertia, dtype=float).reshape(3, 3)
        if not (np.isfinite(self.mass) and self.mass >= 0):
            raise ValueError("payload mass must be >= 0")
        if np.max(np.abs(own - own.T)) > 1e-12 or np.linalg.eigvalsh(own)[0] < -1e-12:
            raise ValueError("payload inertia must be symmetric positive semidefinite")
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "own_inertia", own)


@dataclass(frozen=True)
class StateDerivative:
    r_dot: np.ndarray
    v_dot: np.ndarray
    omega: np.ndarray  # R_dot = R S(omega)
    omega_dot: np.ndarray


@njit(cache=True)
def _accelerations(r, R, w, grfs, feet, stance, mass, inertia, inv_inertia, gravity, f_ext):
    f_net = f_ext.copy()
    tau_net = np.zeros(3)
    for j in range(grfs.shape[0]):
        if stance[j]:
            f_net += grfs[j]
            arm = feet[j] - r
            tau_net += np.cross(arm, grfs[j])
    v_dot = f_net / mass - gravity
    w_dot = inv_inertia @ (R.T @ tau_net - np.cross(w, inertia @ w))
    return v_dot, w_dot


@njit(cache=True)
def _rk4_steps(r, v, R, w, grfs, feet, stance, mass, inertia, inv_inertia, gravity, f_ext, dt, n_steps):
    # RK4 on (r, v, theta, w) with R = R_n exp(S(theta)), theta_n = 0
    r = r.copy()
    v = v.copy()
    R = R.copy()
    w = w.copy()
    for _ in range(n_steps):
        th0 = np.zeros(3)
        a1, b1 = _accelerations(r, R, w, grfs, feet, stance, mass, inertia, inv_inertia, gravity, f_ext)
        k1r, k1v, k1t, k1w = v, a1, w.copy(), b1

        th = 0.5 * dt * k1t
        r2, v2, w2 = r + 0.5 * dt * k1r, v + 0.5 * dt * k1v, w + 0.5 * dt * k1w
        a2, b2 = _accelerations(r2, R @ expm_so3(th), w2, grfs, feet, stance, mass, inertia, inv_inertia, gravity, f_ext)
        k2r, k2v, k2t, k2w = v2, a2, right_jacobian_inv(th) @ w2, b2

        th = 0.5 * dt * k2t
        r3, v3, w3 = r + 0.5 * dt * k2r, v + 0.5 * dt * k2v, w + 0.5 * dt * k2w
        a3, b3 = _accelerations(r3, R @ expm_so3(th), w3, grfs, feet, stance, mass, inertia, inv_inertia, gravity, f_ext)
        k3r, k3v, k3t, k3w = v3, a3, right_jacobian_inv(th) @ w3, b3

        th = dt * k3t
        r4, v4, w4 = r + dt * k3r, v + dt * k3v, w + dt * k3w
        a4, b4 = _accelerations(r4, R @ expm_so3(th), w4, grfs, feet, stance, mass, inertia, inv_inertia, gravity, f_ext)
        k4r, k4v, k4t, k4w = v4, a4, right_jacobian_inv(th) @ w4, b4

        r = r + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        w = w + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        th0 = dt / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t)
        R = R @ expm_so3(th0)
        err = R.T @ R - np.eye(3)
        if np.sqrt(np.sum(err * err)) > 1e-9:
            U, _, Vt = np.linalg.svd(R)
            R = U @ Vt
    return r, v, R, w


def _check_inputs(grfs, feet, gravity, external_force):
    grfs = np.array(grfs, dtype=float).reshape(N_FEET, 3)
    gravity = np.array(gravity, dtype=float).reshape(3)
    f_ext = np.zeros(3) if external_force is None else np.array(external_force, dtype=float).reshape(3)
    for name, arr in (("grfs", grfs), ("feet", feet.positions), ("gravity", gravity), ("external_force", f_ext)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite {name}")
    swing = ~feet.stance
    if np.any(grfs[swing] != 0.0):
        raise ValueError("nonzero force commanded on a swing foot")
    return grfs, gravity, f_ext


def srb_derivative(state, grfs, feet, params, gravity, external_force=None):
    """Time derivative of the plant state.

    Moment arms are taken about the current COM. ``external_force`` acts
    through the COM (used for push disturbances).
    """
    grfs, gravity, f_ext = _check_inputs(grfs, feet, gravity, external_force)
    v_dot, w_dot = _accelerations(
        state.r, state.R, state.omega, grfs, feet.positions, feet.stance,
        params.mass, params.inertia, params.inv_inertia, gravity, f_ext,
    )
    return StateDerivative(state.v.copy(), v_dot, state.omega.copy(), w_dot)


def integrate_step(state, grfs, feet, params, dt, gravity, external_force=None, n_steps=1):
    """Advance ``n_steps`` fixed RK4 steps of size ``dt`` with inputs held."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grfs, gravity, f_ext = _check_inputs(grfs, feet, gravity, external_force)
    r, v, R, w = _rk4_steps(
        state.r, state.v, state.R, state.omega, grfs, feet.positions, feet.stance,
        params.mass, params.inertia, params.inv_inertia, gravity, f_ext, float(dt), int(n_steps),
    )
    if np.linalg.norm(R.T @ R - np.eye(3)) > ORTHO_TOL:
        R = polar_project(R)
    return RigidBodyState(r, v, R, w)


def mechanical_energy(state, params, gravity):
    g = np.linalg.norm(gravity)
    return (0.5 * params.mass * state.v @ state.v
            + 0.5 * state.omega @ params.inertia @ state.omega
            + params.mass * g * state.r[2])


def _point_inertia(mass, d):
    d = np.asarray(d, dtype=float)
    return mass * ((d @ d) * np.eye(3) - np.outer(d, d))


def combine_payload(base, base_com_height, payload):
    """Rigidly attach ``payload`` to a body with params ``base``.

    ``payload.offset`` is measured from the base COM in the body frame.
    Returns the combined params about the new COM and the COM shift
    (new COM minus base COM, body frame).
    """
    if payload.mass == 0.0:
        return base, np.zeros(3)
    if base_com_height + payload.offset[2] < 0:
        raise ValueError("payload would sit below the ground")
    total = base.mass + payload.mass
    shift = payload.mass * payload.offset / total
    inertia = (base.inertia + _point_inertia(base.mass, -shift)
               + payload.own_inertia + _point_inertia(payload.mass, payload.offset - shift))
    inertia = 0.5 * (inertia + inertia.T)
    return InertialParams(total, inertia), shift


def combine_payloads(base, base_com_height, payloads):
    """Attach several payloads whose offsets are all measured from the base COM."""
    params, shift = base, np.zeros(3)
    for p in payloads:
        rel = PayloadSpec(p.mass, p.offset - shift, p.own_inertia)
        params, s = combine_payload(params, base_com_height + shift[2], rel)
        shift = shift + s
    return params, shift


__all__ = [
    "InertialParams", "RigidBodyState", "FootSet", "PayloadSpec", "StateDerivative",
    "srb_derivative", "integrate_step", "combine_payload", "combine_payloads",
    "mechanical_energy", "skew",
]
