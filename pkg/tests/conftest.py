import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ampc_lab.linearize import OperatingPoint
from ampc_lab.srb import InertialParams

from oracles import random_rotation, random_spd

settings.register_profile("lab", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "lab"))


def random_case(rng):
    """Random operating point, inertial params, reduced state and input."""
    stance = rng.random(4) < 0.6
    feet = rng.uniform(-0.3, 0.3, (4, 3))
    feet[:, 2] = rng.uniform(-0.35, -0.15, 4)
    u_bar = rng.normal(0, 40, (4, 3)) * stance[:, None]
    op = OperatingPoint(random_rotation(rng), rng.normal(0, 1.0, 3), u_bar, feet, stance)
    params = InertialParams(rng.uniform(5, 30), random_spd(rng, 0.1))
    x = rng.normal(0, 0.5, 13)
    x[12] = 1.0
    u = rng.normal(0, 50, 12) * np.repeat(stance, 3)
    return op, params, x, u


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)
