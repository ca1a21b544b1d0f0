"""Gradient-descent parameter adaptation and its stability certificates."""
from dataclasses import dataclass, field, replace
import math
from typing import NamedTuple, Optional

import numpy as np

from .regressor import CONST, INV_INERTIA, INV_MASS

N_INPUTS_DEFAULT = 12


@dataclass(frozen=True)
class AdaptiveState:
    """Estimator state carried from one controller tick to the next.

    ``theta_true`` is only set in test benches; when present every update
    appends ``||theta_true - theta_hat||^2`` to ``v_lyap``.
    """

    theta_hat: np.ndarray
    lam: float = 0.2
    gamma_prev: Optional[np.ndarray] = None
    pin_constant: bool = False
    theta_true: Optional[np.ndarray] = None
    v_lyap: tuple = ()
    skipped: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("learning rate must be positive")
        theta = np.array(self.theta_hat, dtype=float)
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta_hat must be finite")
        object.__setattr__(self, "theta_hat", theta)
        if self.theta_true is not None and not self.v_lyap:
            err = np.asarray(self.theta_true) - theta
            object.__setattr__(self, "v_lyap", (float(err @ err),))


@dataclass(frozen=True)
class StabilityReport:
    lambda_max: float
    threshold: float
    satisfied: bool = field(init=False)
    margin: float = field(init=False)

    def __post_init__(self):
        margin = self.threshold - self.lambda_max
        object.__setattr__(self, "margin", margin)
        object.__setattr__(self, "satisfied", margin > 0)


class InputBound(NamedTuple):
    value: float
    feasible: bool
    h_norm: float


class Estimates(NamedTuple):
    mass: float
    inv_inertia: np.ndarray
    valid: bool


def predict_state(gamma, theta_hat):
    return gamma @ theta_hat


def gradient_update(adaptive, x_measured, gamma_next=None):
    """One real-time step of the gradient law.

    Uses the regressor stored from the previous tick; ``gamma_next`` (built
    from the current state and input) is stored for the following tick.
    A non-finite measurement skips the update and sets ``skipped``.
    """
    x_measured = np.asarray(x_measured, dtype=float)
    theta = adaptive.theta_hat
    skipped = False
    if adaptive.gamma_prev is not None:
        if np.all(np.isfinite(x_measured)):
            err = x_measured - adaptive.gamma_prev @ theta
            step = adaptive.lam * (adaptive.gamma_prev.T @ err)
            if adaptive.pin_constant:
                step[CONST] = 0.0
            theta = theta + step
        else:
            skipped = True
    v_lyap = adaptive.v_lyap
    if adaptive.theta_true is not None:
        e = adaptive.theta_true - theta
        v_lyap = v_lyap + (float(e @ e),)
    return replace(adaptive, theta_hat=theta, gamma_prev=gamma_next, v_lyap=v_lyap, skipped=skipped)


def spectral_check(gamma, lam):
    gamma = np.asarray(gamma, dtype=float)
    gram = gamma @ gamma.T
    lmax = float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
    return StabilityReport(max(lmax, 0.0), 2.0 / lam)


def h_norm(h):
    """max_i of the maximum absolute row sum of H_i."""
    return float(np.max(np.sum(np.abs(h), axis=2)))


def convex_input_bound(h, lam, eps_x, n_eff=13, n_inputs=N_INPUTS_DEFAULT):
    """Per-input bound that, with ||x||_1 <= eps_x, implies the spectral condition.

    ``n_eff=13`` uses the trace bound lambda_max <= n max_i ||Gamma_i||_1^2
    (provable); ``n_eff=1`` is the uncorrected bound.
    """
    if not eps_x > 1:
        raise ValueError("eps_x must exceed 1 (the constant slot alone has unit norm)")
    if n_eff < 1:
        raise ValueError("n_eff must be positive")
    c = h if np.isscalar(h) else h_norm(h)
    if c == 0:
        return InputBound(math.inf, True, 0.0)
    b = (math.sqrt(2.0 / (lam * n_eff)) / c - eps_x) / n_inputs
    return InputBound(b, b > 0, c)


def extract_estimates(theta_hat):
    theta_hat = np.asarray(theta_hat, dtype=float)
    inv_I = theta_hat[INV_INERTIA].reshape(3, 3)
    inv_I = 0.5 * (inv_I + inv_I.T)
    if theta_hat[INV_MASS] <= 0 or not np.isfinite(theta_hat[INV_MASS]):
        return Estimates(math.nan, inv_I, False)
    return Estimates(1.0 / theta_hat[INV_MASS], inv_I, True)
