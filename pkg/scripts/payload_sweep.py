"""Largest sustained static payload for each controller."""
import csv
import os
from dataclasses import dataclass, replace

import numpy as np

from ampc_lab import cli, simlab
from _common import parse_config, scenario_path


@dataclass
class SweepConfig:
    scenario: str = "flat_6p5kg.json"
    start: float = 0.0
    stop: float = 18.0
    step: float = 0.5
    full: bool = False
    out: str = "out/sweep"


def main(cfg):
    template = simlab.load_scenario(scenario_path(cfg.scenario))
    masses = [round(float(m), 10) for m in np.arange(cfg.start, cfg.stop + 1e-9, cfg.step)]
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["controller", "payload", "success", "mean_speed", "mean_height", "failure"])
        caps = {}
        for mode in simlab.CONTROLLERS:
            rows, caps[mode] = cli.payload_sweep(replace(template, controller=mode), masses, not cfg.full)
            for m, res in rows:
                w.writerow([mode, m, int(res.success), res.mean_speed, res.mean_height, res.failure])
    for mode, cap in caps.items():
        print(f"{mode}: max sustained payload {cap} kg")
    if caps["baseline"]:
        print(f"ratio {caps['ampc'] / caps['baseline']:.2f}")


if __name__ == "__main__":
    main(parse_config(SweepConfig, __doc__))
