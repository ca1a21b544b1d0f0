"""SO(3) helpers shared by the plant, the linearization and the controller."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def skew(w):
    out = np.zeros((3, 3))
    out[0, 1] = -w[2]
    out[0, 2] = w[1]
    out[1, 0] = w[2]
    out[1, 2] = -w[0]
    out[2, 0] = -w[1]
    out[2, 1] = w[0]
    return out


def vee(S):
    S = np.asarray(S, dtype=float)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


@njit(cache=True)
def expm_so3(phi):
    """Rodrigues formula for exp(S(phi))."""
    angle = math.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    K = skew(phi)
    if angle < 1e-8:
        # second-order series keeps the result orthonormal to ~1e-24
        return np.eye(3) + K + 0.5 * (K @ K)
    a = math.sin(angle) / angle
    b = (1.0 - math.cos(angle)) / (angle * angle)
    return np.eye(3) + a * K + b * (K @ K)


@njit(cache=True)
def right_jacobian_inv(phi):
    """Inverse right Jacobian of SO(3): theta_dot = Jr^-1(theta) omega."""
    angle = math.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    K = skew(phi)
    if angle < 1e-6:
        return np.eye(3) + 0.5 * K + (K @ K) / 12.0
    half = 0.5 * angle
    coef = (1.0 - half * math.cos(half) / math.sin(half)) / (angle * angle)
    return np.eye(3) + 0.5 * K + coef * (K @ K)


def logm_so3(R):
    """Rotation vector of R, i.e. vee(log(R)).

    Uses the symmetric part of R near an angle of pi, where the skew part
    vanishes. Exactly-pi rotations are ambiguous in sign and rejected.
    """
    R = np.asarray(R, dtype=float)
    cos_angle = min(1.0, max(-1.0, 0.5 * (np.trace(R) - 1.0)))
    skew_part = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    sin_angle = float(np.linalg.norm(skew_part))
    angle = math.atan2(sin_angle, cos_angle)
    if angle < 1e-6:
        return skew_part * (1.0 + angle * angle / 6.0)
    if math.pi - angle > 1e-4:
        return skew_part * (angle / sin_angle)
    if math.pi - angle < 1e-12:
        raise ValueError("rotation log is ambiguous at an angle of pi")
    # near pi: axis from the dominant column of (R + I)/2, sign from skew part
    B = 0.5 * (R + np.eye(3))
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / math.sqrt(max(B[k, k], 1e-300))
    axis /= np.linalg.norm(axis)
    if axis @ skew_part < 0.0:
        axis = -axis
    return axis * angle


def rotz(yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def roll_pitch_yaw(R):
    """ZYX Euler angles (roll, pitch, yaw) of a body-to-world rotation."""
    R = np.asarray(R, dtype=float)
    roll = math.atan2(R[2, 1], R[2, 2])
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    yaw = math.atan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def polar_project(R):
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1
        Q = U @ Vt
    return Q
