"""Condensed adaptive MPC over the regressor model, plus the per-tick controller."""
from dataclasses import dataclass, field, replace
from functools import lru_cache
import math

import numpy as np

from . import qp
from .adapt import (AdaptiveState, convex_input_bound, extract_estimates,
                    gradient_update, spectral_check)
from .linearize import C_IDX, N_INPUT, N_STATE, OperatingPoint, to_local_frame
from .regressor import (build_gamma, build_h_stack, predicted_model, rescale_step,
                        theta_from_params)
from .rotations import roll_pitch_yaw, rotz
from .srb import N_FEET

# Q_r, Q_v, Q_xi, Q_omega diagonals
DEFAULT_Q = (1e5, 2e5, 1e6, 1e5, 1e5, 1e5, 1e3, 1e3, 1e3, 5e3, 5e3, 5e3)


@dataclass(frozen=True)
class MpcConfig:
    N: int = 7
    T_s: float = 6.25e-3
    prediction_dt: float = 0.0  # 0 uses T_s
    q_diag: tuple = DEFAULT_Q
    p_scale: float = 10.0
    r_diag: tuple = (1.0,) * N_INPUT
    lam: float = 0.2
    eps_x: float = 4.0
    n_eff: int = 13
    mu: float = 0.6
    f_z_max: float = 250.0
    f_z_min: float = 0.5
    adaptation_enabled: bool = True
    stability_constraint: bool = False
    pin_constant: bool = False
    input_reference: str = "gravity"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon N must be >= 1")
        if not self.T_s > 0:
            raise ValueError("T_s must be positive")
        if self.prediction_dt < 0:
            raise ValueError("prediction_dt must be >= 0")
        if len(self.q_diag) != 12 or min(self.q_diag) <= 0:
            raise ValueError("q_diag needs 12 positive entries")
        if len(self.r_diag) != N_INPUT or min(self.r_diag) <= 0:
            raise ValueError("r_diag needs 12 positive entries")
        if not self.p_scale > 0:
            raise ValueError("p_scale must be positive")
        if self.mu < 0 or self.f_z_min < 0 or self.f_z_max < self.f_z_min:
            raise ValueError("invalid contact force limits")
        if self.input_reference not in ("gravity", "zero"):
            raise ValueError("input_reference must be 'gravity' or 'zero'")

    @property
    def dt_pred(self):
        return self.prediction_dt if self.prediction_dt > 0 else self.T_s

    @property
    def Q(self):
        return np.diag(np.append(self.q_diag, 0.0))

    @property
    def P(self):
        return self.p_scale * self.Q

    @property
    def R(self):
        return np.diag(self.r_diag)


def baseline_mode(cfg):
    """Same pipeline with the estimate pinned at its initial value."""
    return replace(cfg, adaptation_enabled=False)


@dataclass(frozen=True)
class Command:
    v_des: tuple = (0.0, 0.0, 0.0)
    yaw_rate: float = 0.0
    height: float = 0.26


@dataclass
class MpcSolution:
    u0: np.ndarray
    predicted_states: np.ndarray
    predicted_inputs: np.ndarray
    status: str
    stability_margin: float = math.nan
    diagnostics: dict = field(default_factory=dict)


def build_reference(command, N, T_s, yaw=0.0, nominal_height=None):
    """Desired reduced states for steps k = 1..N in the solve-time local frame.

    The anchor sits at ``nominal_height`` above ground, so the z target is
    ``command.height - nominal_height`` (zero when they agree).
    """
    nominal = command.height if nominal_height is None else nominal_height
    v_world = rotz(yaw) @ np.asarray(command.v_des, dtype=float)
    ref = np.zeros((N, N_STATE))
    for k in range(1, N + 1):
        ref[k - 1, 0:3] = v_world * k * T_s
        ref[k - 1, 2] = command.height - nominal
        ref[k - 1, 3:6] = v_world
        ref[k - 1, 8] = command.yaw_rate * k * T_s
        ref[k - 1, 11] = command.yaw_rate
    ref[:, C_IDX] = 1.0
    return ref


def gravity_inputs(theta_hat, stance, gravity, fallback_mass):
    """Equal vertical split of the weight the model predicts, one row per foot."""
    u = np.zeros((N_FEET, 3))
    n = int(np.count_nonzero(stance))
    if n == 0:
        return u
    est = extract_estimates(theta_hat)
    mass = est.mass if est.valid else fallback_mass
    weight = theta_hat[0] * mass * float(np.linalg.norm(gravity))
    if not (np.isfinite(weight) and weight > 0):
        weight = fallback_mass * float(np.linalg.norm(gravity))
    u[stance, 2] = weight / n
    return u


def _condense(A, B, N):
    """Stacked prediction x_{1..N} = Sx x0 + Su U."""
    n, m = B.shape
    Sx = np.empty((N * n, n))
    Su = np.zeros((N * n, N * m))
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    AB = [P @ B for P in powers[:N]]
    for k in range(N):
        Sx[k * n:(k + 1) * n] = powers[k + 1]
        for j in range(k + 1):
            Su[k * n:(k + 1) * n, j * m:(j + 1) * m] = AB[k - j]
    return Sx, Su


def build_and_solve(x0, theta_hat, h, stance, ref, cfg, gravity=(0.0, 0.0, 9.81),
                    fallback_mass=12.45, warm_start=None, h_tick=None):
    """Assemble and solve the condensed AMPC for one controller tick.

    Decision variables are the forces of stance feet only (swing forces are
    identically zero); with ``mu == 0`` only vertical components remain.
    ``h`` drives the prediction; ``h_tick`` (default ``h``) is the one-step
    stack the estimator uses and feeds the stability bound and margin.
    """
    x0 = np.asarray(x0, dtype=float)
    stance = np.asarray(stance, dtype=bool)
    N = cfg.N
    A_hat, B_hat = predicted_model(h, theta_hat)
    h_tick = h if h_tick is None else h_tick

    comps = (2,) if cfg.mu == 0 else (0, 1, 2)
    cols = [3 * j + c for j in range(N_FEET) if stance[j] for c in comps]
    m = len(cols)
    diag = {"n_vars": N * m}

    u_ref = gravity_inputs(theta_hat, stance, gravity, fallback_mass)
    if cfg.input_reference == "zero":
        u_ref = np.zeros_like(u_ref)

    bound = None
    if cfg.stability_constraint:
        bound = convex_input_bound(h_tick, cfg.lam, cfg.eps_x, cfg.n_eff)
        diag["input_bound"] = bound.value
        if not bound.feasible:
            return _failed(x0, N, qp.INFEASIBLE, diag | {"reason": "stability bound infeasible"})

    Sx, Su = _condense(A_hat, B_hat[:, cols], N)
    free = Sx @ x0
    if m == 0:
        # flight: nothing to decide, the prediction is the free response
        gamma = build_gamma(np.concatenate([x0, np.zeros(N_INPUT)]), h_tick)
        return MpcSolution(np.zeros((N_FEET, 3)), free.reshape(N, N_STATE), np.zeros((N, N_INPUT)),
                           qp.OPTIMAL, spectral_check(gamma, cfg.lam).margin,
                           diag | {"iterations": 0, "kkt": 0.0, "solve_time": 0.0})
    q = np.tile(np.diag(cfg.Q), N)
    q[-N_STATE:] *= cfg.p_scale
    r_bar = np.tile(np.asarray(cfg.r_diag)[cols], N)
    uref_flat = np.tile(u_ref.ravel()[cols], N)

    SQ = Su.T * q
    hess = SQ @ Su + np.diag(r_bar)
    hess = 0.5 * (hess + hess.T)
    lin = SQ @ (free - ref.ravel()) - r_bar * uref_flat

    nv = N * m
    C, lb, ub = _contact_rows(tuple(cols), N, cfg.mu, cfg.f_z_min, cfg.f_z_max)
    if bound is not None:
        extra, lo, hi = [np.eye(nv)], [np.full(nv, -bound.value)], [np.full(nv, bound.value)]
        # ||x_k||_1 <= eps_x as per-component boxes on the 12 physical states;
        # the constant slot is input independent and takes its share first
        for k in range(N):
            base = k * N_STATE
            box = (cfg.eps_x - abs(free[base + C_IDX])) / (N_STATE - 1)
            if box <= 0:
                return _failed(x0, N, qp.INFEASIBLE, diag | {"reason": "state bound infeasible"})
            block = slice(base, base + N_STATE - 1)
            extra.append(Su[block])
            lo.append(-box - free[block])
            hi.append(box - free[block])
        C = np.vstack([C, *extra])
        lb = np.concatenate([lb, *lo])
        ub = np.concatenate([ub, *hi])

    problem = qp.QpProblem(hess, lin, C, lb, ub)
    sol = qp.solve(problem, warm_start=warm_start)
    diag.update(solve_time=sol.solve_time, iterations=sol.iterations,
                kkt=max(sol.stationarity, sol.primal, sol.complementarity))
    if sol.multipliers is not None:
        diag["active_constraints"] = int(np.count_nonzero(np.abs(sol.multipliers) > 1e-9))
    if sol.status != qp.OPTIMAL:
        return _failed(x0, N, sol.status, diag)

    U = np.zeros((N, N_INPUT))
    U[:, cols] = sol.y.reshape(N, m)
    if cfg.mu == 0:
        U[:, [c for c in range(N_INPUT) if c % 3 != 2]] = 0.0
    X = (free + Su @ sol.y).reshape(N, N_STATE)
    u0 = U[0].reshape(N_FEET, 3)
    gamma = build_gamma(np.concatenate([x0, U[0]]), h_tick)
    margin = spectral_check(gamma, cfg.lam).margin
    diag["qp_solution"] = sol.y
    return MpcSolution(u0, X, U, qp.OPTIMAL, margin, diag)


@lru_cache(maxsize=64)
def _contact_rows(cols, N, mu, f_z_min, f_z_max):
    """f_z box and friction pyramid rows over the stacked stance-foot forces."""
    m = len(cols)
    nv = N * m
    z_pos = [i for i, col in enumerate(cols) if col % 3 == 2]
    rows, lb, ub = [], [], []
    for k in range(N):
        for i in z_pos:
            zi = k * m + i
            e = np.zeros(nv)
            e[zi] = 1.0
            rows.append(e)
            lb.append(f_z_min)
            ub.append(f_z_max)
            if mu > 0:
                for lat in (zi - 2, zi - 1):
                    for sign in (-1.0, 1.0):
                        r = np.zeros(nv)
                        r[lat] = 1.0
                        r[zi] = sign * mu
                        rows.append(r)
                        # f_lat - mu f_z <= 0 and f_lat + mu f_z >= 0
                        lb.append(-np.inf if sign < 0 else 0.0)
                        ub.append(0.0 if sign < 0 else np.inf)
    out = (np.array(rows).reshape(-1, nv), np.array(lb), np.array(ub))
    for arr in out:
        arr.setflags(write=False)
    return out


def _failed(x0, N, status, diag):
    return MpcSolution(np.zeros((N_FEET, 3)), np.tile(x0, (N, 1)), np.zeros((N, N_INPUT)),
                       status, math.nan, diag)


class AmpcController:
    """Estimator plus AMPC running on the controller tick.

    Each tick: express the new measurement in the previous tick's local
    frame, apply the gradient law, re-anchor, rebuild H at the measured
    operating point and solve. The applied input and the new regressor are
    kept for the next update.
    """

    def __init__(self, cfg, nominal_params, gravity=(0.0, 0.0, 9.81), nominal_height=0.26):
        self.cfg = cfg
        self.nominal = nominal_params
        self.gravity = np.asarray(gravity, dtype=float)
        self.nominal_height = nominal_height
        self.adaptive = AdaptiveState(theta_from_params(nominal_params), lam=cfg.lam,
                                      pin_constant=cfg.pin_constant)
        self.yaw_ref = None
        self.anchor = None
        self.prev = None
        self.prev_u = np.zeros((N_FEET, 3))
        self.x_pred = None

    def tick(self, state, feet, stance, command, ground):
        cfg = self.cfg
        info = {"fallback": False, "update_skipped": False}
        if self.yaw_ref is None:
            self.yaw_ref = float(roll_pitch_yaw(state.R)[2])

        # measurement in the frame of the previous tick, then the update
        x_tilde = np.full(N_STATE, np.nan)
        if self.anchor is not None:
            x_meas = to_local_frame(state, self.yaw_ref, self.anchor)
            if self.x_pred is not None:
                x_tilde = x_meas - self.x_pred
            if cfg.adaptation_enabled:
                self.adaptive = gradient_update(self.adaptive, x_meas)
                info["update_skipped"] = self.adaptive.skipped
            self.yaw_ref += command.yaw_rate * cfg.T_s
        theta = self.adaptive.theta_hat

        self.anchor = np.array([state.r[0], state.r[1], ground + self.nominal_height])
        x0 = to_local_frame(state, self.yaw_ref, self.anchor)
        u_bar = np.where(stance[:, None], self.prev_u, 0.0)
        op = OperatingPoint(state.R, state.omega, u_bar, feet - state.r, stance)
        h = build_h_stack(op, cfg.T_s, self.gravity)
        h_pred = h if cfg.dt_pred == cfg.T_s else rescale_step(h, cfg.T_s, cfg.dt_pred)
        ref = build_reference(command, cfg.N, cfg.dt_pred, self.yaw_ref, self.nominal_height)
        sol = build_and_solve(x0, theta, h_pred, stance, ref, cfg, self.gravity, self.nominal.mass,
                              h_tick=h)

        if sol.status == qp.OPTIMAL:
            u0 = sol.u0
            self.prev = sol
        else:
            info["fallback"] = True
            if self.prev is not None and self.prev.status == qp.OPTIMAL and cfg.N > 1:
                u0 = self.prev.predicted_inputs[1].reshape(N_FEET, 3).copy()
            else:
                u0 = gravity_inputs(theta, stance, self.gravity, self.nominal.mass)
            u0[~stance] = 0.0
            self.prev = None
        u0 = np.where(stance[:, None], u0, 0.0)

        z = np.concatenate([x0, u0.ravel()])
        gamma = build_gamma(z, h)
        report = spectral_check(gamma, cfg.lam)
        self.adaptive = replace(self.adaptive, gamma_prev=gamma)
        self.x_pred = gamma @ theta
        self.prev_u = u0
        info.update(x0=x0, x_tilde=x_tilde, x_pred=self.x_pred, solution=sol,
                    lambda_max=report.lambda_max, margin=report.margin, theta=theta)
        return u0, info
