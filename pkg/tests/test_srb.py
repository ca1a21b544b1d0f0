import numpy as np
import pytest
from hypothesis import given, strategies as st

from ampc_lab.config import GRAVITY
from ampc_lab.rotations import roll_pitch_yaw
from ampc_lab.srb import (FootSet, InertialParams, PayloadSpec, RigidBodyState,
                          combine_payload, combine_payloads, integrate_step,
                          mechanical_energy, srb_derivative)

from oracles import random_rotation, random_spd

NO_FEET = FootSet(np.zeros((4, 3)), np.zeros(4, dtype=bool))


def state(r=(0, 0, 0.3), v=(0, 0, 0), R=np.eye(3), w=(0, 0, 0)):
    return RigidBodyState(r, v, R, w)


def test_free_fall_derivative():
    params = InertialParams(10.0, np.diag([0.1, 0.2, 0.3]))
    w = np.array([0.3, -0.2, 0.5])
    d = srb_derivative(state(w=w), np.zeros((4, 3)), NO_FEET, params, GRAVITY)
    np.testing.assert_allclose(d.v_dot, [0, 0, -9.81], atol=1e-15)
    I = params.inertia
    np.testing.assert_allclose(d.omega_dot, -np.linalg.solve(I, np.cross(w, I @ w)), atol=1e-14)


def test_static_equilibrium():
    m = 12.45
    params = InertialParams(m, np.diag([0.07, 0.26, 0.242]))
    feet = FootSet([[0.2, -0.1, 0], [0.2, 0.1, 0], [-0.2, -0.1, 0], [-0.2, 0.1, 0]])
    grfs = np.tile([0, 0, m * 9.81 / 4], (4, 1))
    d = srb_derivative(state(r=(0, 0, 0.26)), grfs, feet, params, GRAVITY)
    np.testing.assert_allclose(d.v_dot, 0, atol=1e-12)
    np.testing.assert_allclose(d.omega_dot, 0, atol=1e-12)


def test_gyroscopic_hand_example():
    # -I^-1 (w x I w) with I = diag(1,2,3), w = (1,1,1): w x (1,2,3) = (1,-2,1)
    params = InertialParams(1.0, np.diag([1.0, 2.0, 3.0]))
    d = srb_derivative(state(w=(1, 1, 1)), np.zeros((4, 3)), NO_FEET, params, GRAVITY)
    np.testing.assert_allclose(d.omega_dot, [-1.0, 1.0, -1.0 / 3.0], atol=1e-14)


def test_swing_force_rejected():
    feet = FootSet(np.zeros((4, 3)), [True, False, True, True])
    grfs = np.zeros((4, 3))
    grfs[1, 2] = 1.0
    params = InertialParams(1.0, np.eye(3))
    with pytest.raises(ValueError):
        srb_derivative(state(), grfs, feet, params, GRAVITY)


def test_non_finite_rejected():
    params = InertialParams(1.0, np.eye(3))
    with pytest.raises(ValueError):
        srb_derivative(state(), np.full((4, 3), np.nan), NO_FEET, params, GRAVITY)
    with pytest.raises(ValueError):
        state(v=(np.inf, 0, 0))


def test_invalid_params_and_rotation_rejected():
    with pytest.raises(ValueError):
        InertialParams(0.0, np.eye(3))
    with pytest.raises(ValueError):
        InertialParams(1.0, np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        InertialParams(1.0, [[1, 0.1, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        state(R=np.diag([1.0, 1.0, -1.0]))


def test_constant_yaw_rate_integration():
    params = InertialParams(1.0, np.eye(3))
    s = state(w=(0, 0, 1))
    s = integrate_step(s, np.zeros((4, 3)), NO_FEET, params, 1e-3, np.zeros(3), n_steps=1000)
    assert abs(roll_pitch_yaw(s.R)[2] - 1.0) < 1e-6
    assert np.linalg.norm(s.R.T @ s.R - np.eye(3)) < 1e-9


def test_ballistic_velocity():
    params = InertialParams(3.0, np.eye(3))
    s = state()
    for t_end in (0.1, 0.5):
        out = integrate_step(s, np.zeros((4, 3)), NO_FEET, params, 1e-3, GRAVITY,
                             n_steps=int(round(t_end / 1e-3)))
        assert abs(out.v[2] + 9.81 * t_end) < 1e-9


def test_step_halving_converges():
    rng = np.random.default_rng(3)
    params = InertialParams(5.0, random_spd(rng, 0.1))
    feet = FootSet(rng.uniform(-0.3, 0.3, (4, 3)))
    grfs = rng.normal(0, 20, (4, 3))
    s0 = state(v=(0.3, -0.1, 0.2), R=random_rotation(rng), w=(1.0, -0.5, 0.7))
    a = integrate_step(s0, grfs, feet, params, 1e-3, GRAVITY, n_steps=100)
    b = integrate_step(s0, grfs, feet, params, 5e-4, GRAVITY, n_steps=200)
    diff = np.concatenate([a.r - b.r, a.v - b.v, (a.R - b.R).ravel(), a.omega - b.omega])
    assert np.linalg.norm(diff) < 1e-8


def test_dt_must_be_positive():
    params = InertialParams(1.0, np.eye(3))
    with pytest.raises(ValueError):
        integrate_step(state(), np.zeros((4, 3)), NO_FEET, params, 0.0, GRAVITY)


def test_orthonormality_over_a_million_steps():
    params = InertialParams(2.0, np.diag([0.05, 0.2, 0.3]))
    s = state(w=(3.0, 0.1, 2.0))
    s = integrate_step(s, np.zeros((4, 3)), NO_FEET, params, 1e-3, np.zeros(3), n_steps=10 ** 6)
    assert np.linalg.norm(s.R.T @ s.R - np.eye(3)) < 1e-6


def test_energy_conserved_without_contact():
    rng = np.random.default_rng(8)
    params = InertialParams(7.0, random_spd(rng, 0.1))
    s0 = state(r=(0, 0, 2.0), v=(0.5, -0.3, 1.0), R=random_rotation(rng), w=(2.0, -1.0, 0.5))
    e0 = mechanical_energy(s0, params, GRAVITY)
    s1 = integrate_step(s0, np.zeros((4, 3)), NO_FEET, params, 1e-3, GRAVITY, n_steps=1000)
    assert abs(mechanical_energy(s1, params, GRAVITY) - e0) < 1e-5 * abs(e0)


def test_payload_zero_mass_is_identity():
    base = InertialParams(12.45, np.diag([0.07, 0.26, 0.242]))
    out, shift = combine_payload(base, 0.26, PayloadSpec(0.0, np.array([0.1, 0.2, 0.0])))
    assert out == base or np.array_equal(out.inertia, base.inertia)
    np.testing.assert_array_equal(shift, 0)


def test_point_payload_at_com():
    base = InertialParams(12.45, np.diag([0.07, 0.26, 0.242]))
    out, shift = combine_payload(base, 0.26, PayloadSpec(2.0))
    assert out.mass == pytest.approx(14.45, abs=1e-12)
    np.testing.assert_allclose(out.inertia, base.inertia, atol=1e-15)
    np.testing.assert_array_equal(shift, 0)


def test_point_payload_parallel_axis():
    base = InertialParams(12.45, np.diag([0.07, 0.26, 0.242]))
    out, shift = combine_payload(base, 0.26, PayloadSpec(2.0, np.array([0.1, 0.0, 0.0])))
    sx = 2.0 * 0.1 / 14.45
    assert shift[0] == pytest.approx(sx, abs=1e-15)
    gain = 2.0 * (0.1 - sx) ** 2 + 12.45 * sx ** 2
    assert out.inertia[1, 1] == pytest.approx(0.26 + gain, abs=1e-14)
    assert out.inertia[0, 0] == pytest.approx(0.07, abs=1e-14)


@given(st.integers(0, 2 ** 32 - 1))
def test_payload_order_independent(seed):
    rng = np.random.default_rng(seed)
    base = InertialParams(rng.uniform(5, 20), random_spd(rng, 0.1))
    a = PayloadSpec(rng.uniform(0, 5), rng.uniform(-0.2, 0.2, 3), random_spd(rng, 0.01))
    b = PayloadSpec(rng.uniform(0, 5), rng.uniform(-0.2, 0.2, 3), random_spd(rng, 0.01))
    p1, s1 = combine_payloads(base, 1.0, [a, b])
    p2, s2 = combine_payloads(base, 1.0, [b, a])
    assert abs(p1.mass - p2.mass) < 1e-12
    np.testing.assert_allclose(p1.inertia, p2.inertia, atol=1e-12)
    np.testing.assert_allclose(s1, s2, atol=1e-12)
    assert np.linalg.eigvalsh(p1.inertia)[0] > 0


def test_payload_inertia_must_be_psd():
    with pytest.raises(ValueError):
        PayloadSpec(1.0, np.zeros(3), -np.eye(3))
    with pytest.raises(ValueError):
        PayloadSpec(-1.0)
