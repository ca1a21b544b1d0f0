"""Discrete LTV model of the SRB about an operating point.

Reduced state (13 entries, world-aligned axes)::

    x_a = (p[0:3], v[3:6], xi[6:9], omega[9:12], c[12])

``p`` is the COM position relative to a per-solve anchor, ``xi`` the
attitude error as a rotation vector, ``omega`` the body rate and ``c`` a
constant slot fixed at one. Gravity and the gyroscopic drift multiply ``c``
so the one-step map stays linear in ``(x_a, u)``.
"""
from dataclasses import dataclass

import numpy as np

from .rotations import expm_so3, logm_so3, rotz, skew
from .srb import N_FEET

N_STATE = 13
N_INPUT = 3 * N_FEET
N_Z = N_STATE + N_INPUT

P_IDX = slice(0, 3)
V_IDX = slice(3, 6)
XI_IDX = slice(6, 9)
W_IDX = slice(9, 12)
C_IDX = 12


@dataclass
class OperatingPoint:
    R_bar: np.ndarray
    omega_bar: np.ndarray
    u_bar: np.ndarray
    feet_rel: np.ndarray
    stance: np.ndarray
    tau_bar_body: np.ndarray = None

    def __post_init__(self):
        self.R_bar = np.asarray(self.R_bar, dtype=float).reshape(3, 3)
        self.omega_bar = np.asarray(self.omega_bar, dtype=float).reshape(3)
        self.u_bar = np.asarray(self.u_bar, dtype=float).reshape(N_FEET, 3)
        self.feet_rel = np.asarray(self.feet_rel, dtype=float).reshape(N_FEET, 3)
        self.stance = np.asarray(self.stance, dtype=bool).reshape(N_FEET)
        moments = np.cross(self.feet_rel[self.stance], self.u_bar[self.stance])
        tau = self.R_bar.T @ moments.sum(axis=0)
        if self.tau_bar_body is None:
            self.tau_bar_body = tau
        else:
            self.tau_bar_body = np.asarray(self.tau_bar_body, dtype=float).reshape(3)
            if np.max(np.abs(self.tau_bar_body - tau)) > 1e-9:
                raise ValueError("tau_bar_body inconsistent with u_bar and feet_rel")


@dataclass
class LtvModel:
    A: np.ndarray
    B: np.ndarray
    T_s: float

    def step(self, x_a, u):
        return self.A @ x_a + self.B @ np.ravel(u)


def build_ltv(op, params, T_s, gravity):
    """Explicit-Euler discretization of the SRB linearized about ``op``."""
    if not T_s > 0:
        raise ValueError("T_s must be positive")
    inertia = params.inertia
    try:
        I_inv = np.linalg.inv(inertia)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular inertia") from exc
    g = np.asarray(gravity, dtype=float)
    Rb, wb, tau = op.R_bar, op.omega_bar, op.tau_bar_body
    I3 = np.eye(3)

    A = np.zeros((N_STATE, N_STATE))
    B = np.zeros((N_STATE, N_INPUT))
    A[P_IDX, P_IDX] = I3
    A[P_IDX, V_IDX] = T_s * I3
    A[V_IDX, V_IDX] = I3
    A[V_IDX, C_IDX] = -T_s * g
    A[XI_IDX, XI_IDX] = I3
    A[XI_IDX, W_IDX] = T_s * I3

    gyro = skew(inertia @ wb) - skew(wb) @ inertia
    A[W_IDX, XI_IDX] = T_s * I_inv @ skew(tau)
    A[W_IDX, W_IDX] = I3 + T_s * I_inv @ gyro
    ref_torque = np.zeros(3)
    for j in range(N_FEET):
        if not op.stance[j]:
            continue
        cols = slice(3 * j, 3 * j + 3)
        B[V_IDX, cols] = (T_s / params.mass) * I3
        arm = Rb.T @ skew(op.feet_rel[j])
        B[W_IDX, cols] = T_s * I_inv @ arm
        ref_torque += arm @ op.u_bar[j]
    A[W_IDX, C_IDX] = (
        -T_s * I_inv @ (gyro @ wb)
        - T_s * I_inv @ ref_torque
        + T_s * I_inv @ (tau - skew(wb) @ inertia @ wb)
    )
    A[C_IDX, C_IDX] = 1.0
    return LtvModel(A, B, float(T_s))


def one_step_map(x_a, u, op, params, T_s, gravity):
    """Euler step of the nonlinear SRB in reduced coordinates.

    Reference map for checking :func:`build_ltv`: the attitude is
    ``R_bar exp(S(xi))``, moment arms are frozen at ``op.feet_rel`` and the
    attitude kinematics are taken as ``xi_dot = omega``, matching the
    modeling choices of the linearization.
    """
    x_a = np.asarray(x_a, dtype=float)
    u = np.asarray(u, dtype=float).reshape(N_FEET, 3)
    g = np.asarray(gravity, dtype=float)
    p, v, xi, w, c = x_a[P_IDX], x_a[V_IDX], x_a[XI_IDX], x_a[W_IDX], x_a[C_IDX]
    R = op.R_bar @ expm_so3(xi)
    f_net = np.zeros(3)
    tau = np.zeros(3)
    for j in range(N_FEET):
        if op.stance[j]:
            f_net += u[j]
            tau += np.cross(op.feet_rel[j], u[j])
    inertia = params.inertia
    v_dot = f_net / params.mass - g * c
    w_dot = np.linalg.solve(inertia, R.T @ tau - np.cross(w, inertia @ w))
    out = np.empty(N_STATE)
    out[P_IDX] = p + T_s * v
    out[V_IDX] = v + T_s * v_dot
    out[XI_IDX] = xi + T_s * w
    out[W_IDX] = w + T_s * w_dot
    out[C_IDX] = c
    return out


def to_local_frame(state, reference_yaw, anchor):
    x = np.zeros(N_STATE)
    x[P_IDX] = state.r - np.asarray(anchor, dtype=float)
    x[V_IDX] = state.v
    x[XI_IDX] = logm_so3(rotz(reference_yaw).T @ state.R)
    x[W_IDX] = state.omega
    x[C_IDX] = 1.0
    return x
