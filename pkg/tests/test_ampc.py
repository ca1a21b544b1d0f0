from dataclasses import replace

import numpy as np
import pytest

from ampc_lab import qp, simlab
from ampc_lab.ampc import (Command, MpcConfig, baseline_mode, build_and_solve,
                           build_reference)
from ampc_lab.config import GRAVITY, RobotConfig
from ampc_lab.linearize import OperatingPoint
from ampc_lab.regressor import build_h_stack, theta_from_params
from ampc_lab.srb import InertialParams

ROBOT = RobotConfig()


def standing_inputs(mass, stance=np.ones(4, bool), cfg=MpcConfig()):
    feet = ROBOT.hips.copy()
    feet[:, 2] = -ROBOT.nominal_height
    op = OperatingPoint(np.eye(3), np.zeros(3), np.zeros((4, 3)), feet, stance)
    h = build_h_stack(op, cfg.T_s, GRAVITY)
    ref = build_reference(Command(), cfg.N, cfg.T_s, 0.0, ROBOT.nominal_height)
    x0 = np.zeros(13)
    x0[12] = 1.0
    theta = theta_from_params(InertialParams(mass, np.diag(ROBOT.inertia_diag)))
    return x0, theta, h, ref


def test_reference_zero_command():
    ref = build_reference(Command(), 7, 6.25e-3, 0.0, 0.26)
    expected = np.zeros((7, 13))
    expected[:, 12] = 1.0
    np.testing.assert_array_equal(ref, expected)


def test_reference_forward_speed():
    ref = build_reference(Command(v_des=(0.5, 0, 0)), 7, 6.25e-3, 0.0, 0.26)
    assert ref[3, 0] == pytest.approx(0.0125, abs=1e-15)  # step k = 4
    np.testing.assert_allclose(ref[:, 3], 0.5)


def test_reference_height_and_yaw():
    ref = build_reference(Command(height=0.26, yaw_rate=0.4), 5, 0.01, 0.0, 0.26)
    np.testing.assert_array_equal(ref[:, 2], 0.0)
    np.testing.assert_allclose(ref[:, 8], 0.4 * 0.01 * np.arange(1, 6))
    np.testing.assert_allclose(ref[:, 11], 0.4)
    ref = build_reference(Command(height=0.28), 3, 0.01, 0.0, 0.26)
    np.testing.assert_allclose(ref[:, 2], 0.02)


def test_standing_static_equilibrium():
    m = 12.45 + 6.5
    x0, theta, h, ref = standing_inputs(m)
    sol = build_and_solve(x0, theta, h, np.ones(4, bool), ref, MpcConfig(), GRAVITY)
    assert sol.status == qp.OPTIMAL
    np.testing.assert_allclose(sol.u0[:, 2], m * 9.81 / 4, atol=0.5)
    np.testing.assert_allclose(sol.u0[:, :2], 0.0, atol=0.5)


def test_flight_forces_zero_and_ballistic():
    x0, theta, h, ref = standing_inputs(12.45, stance=np.zeros(4, bool))
    sol = build_and_solve(x0, theta, h, np.zeros(4, bool), ref, MpcConfig(), GRAVITY)
    np.testing.assert_array_equal(sol.predicted_inputs, 0.0)
    T = MpcConfig().T_s
    vz = sol.predicted_states[:, 5]
    np.testing.assert_allclose(vz, -9.81 * T * np.arange(1, 8), atol=1e-9)


def test_zero_friction_removes_lateral_forces():
    cfg = MpcConfig(mu=0.0)
    x0, theta, h, ref = standing_inputs(15.0)
    x0[3] = 0.3  # a velocity error the lateral forces would otherwise correct
    sol = build_and_solve(x0, theta, h, np.ones(4, bool), ref, cfg, GRAVITY)
    assert sol.status == qp.OPTIMAL
    assert np.all(sol.u0[:, :2] == 0.0)


def test_friction_pyramid_and_bounds_respected():
    cfg = MpcConfig()
    x0, theta, h, ref = standing_inputs(15.0)
    x0[3:6] = [0.8, -0.5, 0.3]
    x0[9:12] = [1.0, -2.0, 0.5]
    stance = np.array([True, False, False, True])
    sol = build_and_solve(x0, theta, h, stance, ref, cfg, GRAVITY)
    assert sol.status == qp.OPTIMAL
    for u in sol.predicted_inputs:
        assert simlab.friction_ok(u, stance, cfg.mu, tol=1e-8)
        fz = u.reshape(4, 3)[stance, 2]
        assert np.all(fz >= cfg.f_z_min - 1e-8) and np.all(fz <= cfg.f_z_max + 1e-8)


def test_certified_bound_is_surfaced_as_infeasible():
    cfg = MpcConfig(stability_constraint=True)
    x0, theta, h, ref = standing_inputs(18.95)
    sol = build_and_solve(x0, theta, h, np.ones(4, bool), ref, cfg, GRAVITY)
    assert sol.status == qp.INFEASIBLE
    assert "reason" in sol.diagnostics


def test_baseline_toggles_only_adaptation():
    cfg = MpcConfig()
    base = baseline_mode(cfg)
    assert not base.adaptation_enabled
    assert replace(base, adaptation_enabled=True) == cfg


def standing(controller, payload=0.0, q_scale=1.0, duration=3.0):
    sc = simlab.load_scenario("scenarios/standing.json")
    q = list(sc.mpc.q_diag)
    q[0:3] = [v * q_scale for v in q[0:3]]
    sc = replace(sc, controller=controller, duration=duration, mpc=replace(sc.mpc, q_diag=tuple(q)),
                 payloads=(simlab.PayloadEvent(mass=payload),) if payload else ())
    return simlab.run_episode(sc)


def test_nominal_plant_baseline_equals_ampc():
    ta, _ = standing("ampc", duration=0.5)
    tb, _ = standing("baseline", duration=0.5)
    cols = [f"u_{j}_{a}" for j in range(4) for a in "xyz"]
    for c in cols:
        np.testing.assert_allclose(ta.column(c), tb.column(c), atol=1e-6)


def test_baseline_never_updates_estimate():
    tele, _ = standing("baseline", payload=3.0, duration=1.0)
    theta = np.array([tele.column(c) for c in tele.columns if c.startswith("theta_")])
    assert np.all(theta == theta[:, :1])


def test_baseline_sags_more_than_ampc_with_payload():
    _, ra = standing("ampc", payload=6.5)
    _, rb = standing("baseline", payload=6.5)
    assert rb.mean_height < ra.mean_height


def test_one_step_prediction_consistency():
    tele, _ = standing("baseline", duration=1.0)
    err = tele.column("xtilde_norm")[1:]
    assert np.all(err < 1e-3)


def test_doubling_position_weight_reduces_error():
    t1, _ = standing("baseline", payload=4.0, q_scale=1.0)
    t2, _ = standing("baseline", payload=4.0, q_scale=2.0)
    tail = lambda t: np.mean(np.abs(t.column("height")[-160:] - 0.26))
    assert tail(t2) < tail(t1)
