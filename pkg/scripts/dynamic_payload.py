"""Mid-run payload additions and the estimator's mass trace."""
import os
from dataclasses import dataclass

import numpy as np

from ampc_lab import simlab
from _common import parse_config, scenario_path


@dataclass
class DynamicConfig:
    scenario: str = "dynamic_payload.json"
    settle: float = 2.0
    out: str = "out/dynamic"


def main(cfg):
    sc = simlab.load_scenario(scenario_path(cfg.scenario))
    tele, res = simlab.run_episode(sc)
    simlab.write_outputs(tele, cfg.out)
    t, m, mh = tele.column("time"), tele.column("mass_true"), tele.column("mass_hat")
    print(res.summary())
    for ev in (p for p in sc.payloads if p.mode == "dynamic"):
        i = min(int(np.searchsorted(t, ev.time + cfg.settle)), len(t) - 1)
        print(f"+{ev.mass:g} kg at {ev.time:g} s: after {cfg.settle:g} s mass_hat {mh[i]:.3f}, "
              f"true {m[i]:.3f}, error {100 * abs(mh[i] - m[i]) / m[i]:.2f}%")


if __name__ == "__main__":
    main(parse_config(DynamicConfig, __doc__))
