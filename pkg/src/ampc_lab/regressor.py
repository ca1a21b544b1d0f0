"""Parameter vector layout and the regressor that makes the LTV step linear in it.

Layout of the 65-entry parameter vector::

    [0]        1            constant (absorbs deterministic terms)
    [1]        1/m
    [2:11]     I^-1         row-major, 9 entries
    [11:65]    kappa        (I^-1)_a * I_s, a in 0..8 row-major,
                            s in (xx, yy, zz, xy, xz, yz); index 11 + 6*a + s

The one-step update of state row ``i`` is ``z^T H[i] theta`` with
``z = col(x_a, u)``; see ``docs/theta_layout.md``.
"""
import numpy as np
from numba import njit

from .linearize import C_IDX, N_STATE, N_Z
from .rotations import skew
from .srb import N_FEET

N_THETA = 65
THETA_LAYOUT_VERSION = 1
CONST = 0
INV_MASS = 1
INV_INERTIA = slice(2, 11)
KAPPA = slice(11, 65)
SYM_ENTRIES = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
SYM_NAMES = ("xx", "yy", "zz", "xy", "xz", "yz")


def kappa_index(a, s):
    return 11 + 6 * a + s


def _sym_basis():
    basis = np.zeros((6, 3, 3))
    for s, (k, l) in enumerate(SYM_ENTRIES):
        basis[s, k, l] = 1.0
        basis[s, l, k] = 1.0
    return basis


SYM_BASIS = _sym_basis()


def theta_labels():
    labels = ["one", "inv_mass"]
    labels += [f"inv_I_{k}{l}" for k in range(3) for l in range(3)]
    labels += [f"kappa_{a // 3}{a % 3}_{SYM_NAMES[s]}" for a in range(9) for s in range(6)]
    return labels


def theta_from_params(params):
    try:
        I_inv = np.linalg.inv(params.inertia)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular inertia") from exc
    theta = np.empty(N_THETA)
    theta[CONST] = 1.0
    theta[INV_MASS] = 1.0 / params.mass
    theta[INV_INERTIA] = I_inv.ravel()
    I_sym = np.array([params.inertia[k, l] for k, l in SYM_ENTRIES])
    theta[KAPPA] = np.outer(I_inv.ravel(), I_sym).ravel()
    return theta


@njit(cache=True)
def _h_kernel(R_bar, wb, tau, feet_rel, stance, T_s, g, sym_basis):
    H = np.zeros((N_STATE, N_Z, N_THETA))
    u0 = N_STATE  # first input column of z
    for b in range(3):
        # p rows: p + T_s v
        H[b, b, CONST] = 1.0
        H[b, 3 + b, CONST] = T_s
        # v rows: v - T_s g c + T_s/m sum f
        H[3 + b, 3 + b, CONST] = 1.0
        H[3 + b, C_IDX, CONST] = -T_s * g[b]
        # xi rows: xi + T_s omega
        H[6 + b, 6 + b, CONST] = 1.0
        H[6 + b, 9 + b, CONST] = T_s
        # omega rows: identity part
        H[9 + b, 9 + b, CONST] = 1.0
    H[C_IDX, C_IDX, CONST] = 1.0
    for j in range(N_FEET):
        if stance[j]:
            for b in range(3):
                H[3 + b, u0 + 3 * j + b, INV_MASS] = T_s

    # torque-like vector w(z) = S(tau_body) xi + R^T sum S(r_j) f_j, linear in z
    dw = np.zeros((3, N_Z))
    dw[:, 6:9] = skew(tau)
    for j in range(N_FEET):
        if stance[j]:
            dw[:, u0 + 3 * j:u0 + 3 * j + 3] = R_bar.T @ skew(feet_rel[j])

    # gyroscopic part, for each symmetric inertia entry s:
    # L_s(z) = S(E_s wb) omega - S(wb) E_s omega + S(wb) E_s wb c
    Sw = skew(wb)
    dL = np.zeros((6, 3, N_Z))
    for s in range(6):
        E = sym_basis[s]
        dL[s, :, 9:12] = skew(E @ wb) - Sw @ E
        dL[s, :, C_IDX] = Sw @ E @ wb

    for i in range(3):
        row = 9 + i
        for b in range(3):
            a = 3 * i + b
            for col in range(N_Z):
                H[row, col, 2 + a] = T_s * dw[b, col]
                for s in range(6):
                    H[row, col, 11 + 6 * a + s] = T_s * dL[s, b, col]
    return H


def build_h_stack(op, T_s, gravity):
    """Coefficient tensor H of shape (13, 25, 65) for one operating point."""
    g = np.asarray(gravity, dtype=float).reshape(3)
    return _h_kernel(np.ascontiguousarray(op.R_bar, dtype=float),
                     np.ascontiguousarray(op.omega_bar, dtype=float),
                     np.ascontiguousarray(op.tau_bar_body, dtype=float),
                     np.ascontiguousarray(op.feet_rel, dtype=float),
                     np.ascontiguousarray(op.stance, dtype=np.bool_), float(T_s), g, SYM_BASIS)


def _identity_part():
    h0 = np.zeros((N_STATE, N_Z, N_THETA))
    for i in range(N_STATE):
        h0[i, i, CONST] = 1.0
    return h0


_H_IDENTITY = _identity_part()


def rescale_step(h, T_from, T_to):
    """H for step ``T_to`` from H built with step ``T_from``.

    Every entry except the identity part is proportional to the step, so
    the stack is affine in it.
    """
    return _H_IDENTITY + (T_to / T_from) * (h - _H_IDENTITY)


def build_gamma(z, h):
    z = np.asarray(z, dtype=float)
    if z[C_IDX] != 1.0:
        raise ValueError("constant slot of z must be 1")
    return np.einsum("l,ilk->ik", z, h)


def predicted_model(h, theta):
    """(A_hat, B_hat) with row i equal to (H[i] theta)^T split at the input boundary."""
    M = h @ theta  # (13, 25)
    return M[:, :N_STATE], M[:, N_STATE:]


__all__ = [
    "N_THETA", "THETA_LAYOUT_VERSION", "theta_from_params", "theta_labels",
    "build_h_stack", "build_gamma", "predicted_model", "kappa_index", "rescale_step",
]
