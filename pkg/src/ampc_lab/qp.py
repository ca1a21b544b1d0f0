"""Dense strictly convex QP solver.

Solves ``min 0.5 y'Hy + g'y  s.t.  lb <= C y <= ub`` with a Mehrotra
predictor-corrector interior-point method, then polishes the result by
solving the equality-constrained KKT system on the detected active set.
"""
from dataclasses import dataclass, field
import time

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"

KKT_TOL = 1e-8


@dataclass
class QpProblem:
    hessian: np.ndarray
    linear: np.ndarray
    C: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.hessian = np.asarray(self.hessian, dtype=float)
        d = self.hessian.shape[0]
        self.linear = np.asarray(self.linear, dtype=float).reshape(d)
        if self.C is None:
            self.C = np.zeros((0, d))
        self.C = np.asarray(self.C, dtype=float).reshape(-1, d)
        k = self.C.shape[0]
        self.lb = np.full(k, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(k)
        self.ub = np.full(k, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(k)
        if np.max(np.abs(self.hessian - self.hessian.T), initial=0.0) > 1e-10:
            raise ValueError("hessian must be symmetric")
        if np.any(self.lb > self.ub):
            raise ValueError("lb must not exceed ub")

    @property
    def dim(self):
        return self.hessian.shape[0]

    def objective(self, y):
        return 0.5 * y @ self.hessian @ y + self.linear @ y


@dataclass
class QpSolution:
    y: np.ndarray
    status: str
    stationarity: float = np.inf
    primal: float = np.inf
    complementarity: float = np.inf
    iterations: int = 0
    solve_time: float = 0.0
    multipliers: np.ndarray = field(default=None, repr=False)

    @property
    def kkt_residuals(self):
        return {"stationarity": self.stationarity, "primal": self.primal,
                "complementarity": self.complementarity}


def _split(problem):
    C, lb, ub = problem.C, problem.lb, problem.ub
    eq = np.isfinite(lb) & np.isfinite(ub) & (lb == ub)
    up = np.isfinite(ub) & ~eq
    lo = np.isfinite(lb) & ~eq
    E, e = C[eq], ub[eq]
    G = np.vstack([C[up], -C[lo]])
    h = np.concatenate([ub[up], -lb[lo]])
    rows = (np.flatnonzero(eq), np.flatnonzero(up), np.flatnonzero(lo))
    return E, e, G, h, rows


def _row_multipliers(problem, rows, nu, z):
    """Signed per-row multipliers lam with stationarity H y + g + C' lam = 0."""
    eq, up, lo = rows
    lam = np.zeros(problem.C.shape[0])
    lam[eq] += nu
    lam[up] += z[:len(up)]
    lam[lo] -= z[len(up):]
    return lam


def kkt_residuals(problem, y, lam):
    """Stationarity, primal violation and min-map complementarity residuals."""
    C, lb, ub = problem.C, problem.lb, problem.ub
    stat = problem.hessian @ y + problem.linear + C.T @ lam
    cy = C @ y
    viol = np.concatenate([np.maximum(cy - ub, 0.0), np.maximum(lb - cy, 0.0)])
    # lam > 0 pairs with the upper side, lam < 0 with the lower side
    gap_u = np.where(np.isfinite(ub), ub - cy, 0.0)
    gap_l = np.where(np.isfinite(lb), cy - lb, 0.0)
    # min-map residual: zero iff the multiplier or its gap vanishes
    comp = np.where(lam > 0, np.minimum(lam, np.abs(gap_u)), np.minimum(-lam, np.abs(gap_l)))
    # dual sign violations count as complementarity failures
    bad_sign = np.where((lam > 0) & ~np.isfinite(ub), lam, 0.0) + np.where((lam < 0) & ~np.isfinite(lb), -lam, 0.0)
    return (float(np.max(np.abs(stat), initial=0.0)),
            float(np.max(viol, initial=0.0)),
            float(max(np.max(np.abs(comp), initial=0.0), np.max(bad_sign, initial=0.0))))


@njit(cache=True)
def _chol_solve(L, b):
    """Solve L L' x = b for a matrix right-hand side ``b``."""
    n = L.shape[0]
    x = b.copy()
    for c in range(x.shape[1]):
        for i in range(n):
            acc = x[i, c]
            for k in range(i):
                acc -= L[i, k] * x[k, c]
            x[i, c] = acc / L[i, i]
        for i in range(n - 1, -1, -1):
            acc = x[i, c]
            for k in range(i + 1, n):
                acc -= L[k, i] * x[k, c]
            x[i, c] = acc / L[i, i]
    return x


@njit(cache=True)
def _kkt_direction(L, E, ET, rhs, r_e):
    """Solve [K E'; E 0][dy; dnu] = [rhs; -r_e] given the Cholesky factor of K."""
    Kr = np.ascontiguousarray(_chol_solve(L, rhs.reshape(-1, 1))[:, 0])
    if E.shape[0] == 0:
        return Kr, np.zeros(0)
    KE = _chol_solve(L, ET)
    S = E @ KE
    dnu = np.linalg.lstsq(S, E @ Kr + r_e)[0]
    return Kr - KE @ dnu, dnu


@njit(cache=True)
def _max_step(x, dx):
    a = 1.0
    for i in range(x.shape[0]):
        if dx[i] < 0:
            a = min(a, -x[i] / dx[i])
    return a


@njit(cache=True)
def _ipm(H, g, E, e, G, h, y, max_iter, tol):
    """Mehrotra predictor-corrector iterations; returns (y, nu, z, s, code, iters).

    code: 0 optimal, 1 infeasible, 2 iteration limit or numerical failure.
    """
    d = H.shape[0]
    m = G.shape[0]
    GT = G.T.copy()
    ET = E.T.copy()
    # row-wise sparsity of G for the G' W G accumulation
    ptr = np.zeros(m + 1, dtype=np.int64)
    for r in range(m):
        cnt = 0
        for c in range(d):
            if G[r, c] != 0.0:
                cnt += 1
        ptr[r + 1] = ptr[r] + cnt
    idx = np.empty(ptr[m], dtype=np.int64)
    val = np.empty(ptr[m])
    for r in range(m):
        k = ptr[r]
        for c in range(d):
            if G[r, c] != 0.0:
                idx[k] = c
                val[k] = G[r, c]
                k += 1
    nu = np.zeros(E.shape[0])
    s = np.maximum(h - G @ y, 1.0)
    z = np.ones(m)
    scale = 1.0
    for v in g:
        scale = max(scale, 1.0 + abs(v))
    for v in h:
        scale = max(scale, 1.0 + abs(v))
    for v in e:
        scale = max(scale, 1.0 + abs(v))
    best_rp = np.inf
    stall = 0
    code = 2
    it = 0
    for it in range(1, max_iter + 1):
        r_d = H @ y + g + ET @ nu + GT @ z
        r_e = E @ y - e
        r_p = G @ y + s - h
        mu = (s @ z) / m if m > 0 else 0.0
        res = 0.0
        for v in r_d:
            res = max(res, abs(v))
        rp_norm = 0.0
        for v in r_p:
            rp_norm = max(rp_norm, abs(v))
        re_norm = 0.0
        for v in r_e:
            re_norm = max(re_norm, abs(v))
        res = max(res, max(rp_norm, re_norm))
        if res < tol * scale and mu < tol:
            code = 0
            break
        if m > 0:
            zn = np.max(z)
            if zn > 1e6 * scale:
                cert = GT @ z + ET @ nu
                if np.max(np.abs(cert)) < 1e-6 * zn and (h @ z + e @ nu) < -1e-6 * zn:
                    code = 1
                    break
        rp_tot = rp_norm + re_norm
        if rp_tot < 0.5 * best_rp:
            best_rp = rp_tot
            stall = 0
        else:
            stall += 1
            if stall >= 50 and rp_tot > 1e-6 * scale:
                code = 1
                break

        K = H.copy()
        for r in range(m):
            wr = z[r] / s[r]
            for a in range(ptr[r], ptr[r + 1]):
                va = wr * val[a]
                ia = idx[a]
                for b in range(ptr[r], ptr[r + 1]):
                    K[ia, idx[b]] += va * val[b]
        try:
            L = np.linalg.cholesky(K)
        except Exception:
            # w = z/s overflowed the factorization; hand the iterate to the polish step
            code = 2
            break

        r_c = s * z
        rhs = -r_d - GT @ ((-r_c + z * r_p) / s)
        dy, dnu = _kkt_direction(L, E, ET, rhs, r_e)
        ds = -r_p - G @ dy
        dz = (-r_c - z * ds) / s
        if m > 0:
            a_aff = min(_max_step(s, ds), _max_step(z, dz))
            mu_aff = ((s + a_aff * ds) @ (z + a_aff * dz)) / m
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            r_c = s * z + ds * dz - sigma * mu
            rhs = -r_d - GT @ ((-r_c + z * r_p) / s)
            dy, dnu = _kkt_direction(L, E, ET, rhs, r_e)
            ds = -r_p - G @ dy
            dz = (-r_c - z * ds) / s
            alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
        else:
            alpha = 1.0
        y = y + alpha * dy
        nu = nu + alpha * dnu
        s = s + alpha * ds
        z = z + alpha * dz
    return y, nu, z, s, code, it


def _initial_point(H, g, E, e):
    fac = cho_factor(H, check_finite=False)
    y = cho_solve(fac, -g, check_finite=False)
    if E.shape[0] == 0:
        return y
    KE = cho_solve(fac, E.T, check_finite=False)
    dnu = np.linalg.lstsq(E @ KE, E @ y - e, rcond=None)[0]
    return y - KE @ dnu


def _polish(problem, E, e, G, h, rows, y, z, s):
    active = z > s
    A = np.vstack([E, G[active]])
    b = np.concatenate([e, h[active]])
    d = problem.dim
    na = A.shape[0]
    kkt = np.zeros((d + na, d + na))
    kkt[:d, :d] = problem.hessian
    kkt[:d, d:] = A.T
    kkt[d:, :d] = A
    rhs = np.concatenate([-problem.linear, b])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    y_p = sol[:d]
    mult = sol[d:]
    nu = mult[:E.shape[0]]
    z_p = np.zeros_like(z)
    z_p[active] = mult[E.shape[0]:]
    if np.any(z_p < -KKT_TOL):
        return None
    z_p = np.maximum(z_p, 0.0)
    return y_p, nu, z_p


def solve(problem, warm_start=None, max_iter=100, tol=1e-10):
    """Solve ``problem``; deterministic for identical inputs."""
    t0 = time.perf_counter()
    H, g = problem.hessian, problem.linear
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise ValueError("hessian is not positive definite") from exc
    E, e, G, h, rows = _split(problem)
    d = problem.dim

    if warm_start is not None:
        y0 = np.asarray(warm_start, dtype=float).reshape(d).copy()
    else:
        y0 = _initial_point(H, g, E, e)
    c = np.ascontiguousarray
    y, nu, z, s, code, it = _ipm(c(H), c(g), c(E), c(e), c(G), c(h), c(y0),
                                 int(max_iter), float(tol))
    status = (OPTIMAL, INFEASIBLE, MAX_ITER)[code]

    lam = _row_multipliers(problem, rows, nu, z)
    if status != INFEASIBLE and G.shape[0]:
        polished = _polish(problem, E, e, G, h, rows, y, z, s)
        if polished is not None:
            y_p, nu_p, z_p = polished
            lam_p = _row_multipliers(problem, rows, nu_p, z_p)
            if max(kkt_residuals(problem, y_p, lam_p)) <= max(kkt_residuals(problem, y, lam)):
                y, lam = y_p, lam_p
    stat, prim, comp = kkt_residuals(problem, y, lam)
    if status != INFEASIBLE:
        status = OPTIMAL if max(stat, prim, comp) < KKT_TOL else MAX_ITER
    return QpSolution(y, status, stat, prim, comp, it, time.perf_counter() - t0, lam)
