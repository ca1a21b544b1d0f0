"""Independent reference computations used as test oracles.

Nothing here imports the solver or regressor internals; each oracle is a
direct, slow evaluation of the quantity under test.
"""
import itertools

import numpy as np


def qp_enumeration(H, g, C, lb, ub, feas_tol=1e-9):
    """Optimal objective of min 0.5 y'Hy + g'y, lb <= Cy <= ub, by trying every active set.

    Returns None when no active set yields a feasible point.
    """
    d, k = len(g), C.shape[0]
    best = None
    for choice in itertools.product((0, 1, 2), repeat=k):
        A, b = [], []
        ok = True
        for i, side in enumerate(choice):
            if side == 1:
                if not np.isfinite(lb[i]):
                    ok = False
                    break
                A.append(C[i])
                b.append(lb[i])
            elif side == 2:
                if not np.isfinite(ub[i]) or lb[i] == ub[i]:
                    ok = False
                    break
                A.append(C[i])
                b.append(ub[i])
        if not ok:
            continue
        A = np.array(A).reshape(-1, d)
        b = np.array(b)
        na = len(b)
        K = np.block([[H, A.T], [A, np.zeros((na, na))]])
        try:
            sol = np.linalg.solve(K, np.concatenate([-g, b]))
        except np.linalg.LinAlgError:
            continue
        y = sol[:d]
        cy = C @ y
        if np.all(cy >= lb - feas_tol) and np.all(cy <= ub + feas_tol):
            f = 0.5 * y @ H @ y + g @ y
            if best is None or f < best:
                best = f
    return best


def jacobi_eigenvalues(S, sweeps=100, tol=1e-15):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(S, dtype=float)
    n = A.shape[0]
    for _ in range(sweeps):
        off = np.abs(A - np.diag(np.diag(A))).max()
        if off <= tol * max(1.0, np.abs(A).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                elif tau == 0:
                    t = 1.0
                else:
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


def central_jacobian(f, x, eps=1e-6):
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    J = np.zeros((f0.size, x.size))
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = eps
        J[:, i] = (np.asarray(f(x + dx)) - np.asarray(f(x - dx))) / (2 * eps)
    return J


def skew_hand(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def rotation_about(axis, angle):
    """Rodrigues formula, written out independently of the package."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = skew_hand(axis)
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_spd(rng, scale=1.0):
    M = rng.normal(size=(3, 3))
    return scale * (M @ M.T + 0.5 * np.eye(3))
