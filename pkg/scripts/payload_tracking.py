"""Flat-ground trot at 0.5 m/s with static payloads, AMPC against the fixed-model baseline."""
import csv
import os
from dataclasses import dataclass, field, replace

from ampc_lab import simlab
from _common import parse_config, scenario_path


@dataclass
class TrackingConfig:
    scenario: str = "flat_6p5kg.json"
    payloads: list = field(default_factory=lambda: [4.0, 6.0, 10.0])
    out: str = "out/tracking"
    write_telemetry: bool = True


def main(cfg):
    template = simlab.load_scenario(scenario_path(cfg.scenario))
    base = template.payloads[0]
    os.makedirs(cfg.out, exist_ok=True)
    rows = []
    for mass in cfg.payloads:
        for mode in simlab.CONTROLLERS:
            sc = replace(template, controller=mode, payloads=(replace(base, mass=float(mass)),))
            tele, res = simlab.run_episode(sc)
            if cfg.write_telemetry:
                simlab.write_outputs(tele, os.path.join(cfg.out, f"{mode}_{mass:g}kg"))
            rows.append([mass, mode, int(res.success), res.mean_speed, res.mean_height, res.failure])
            print(f"{mass:5.1f} kg {mode:8s} {res.summary()}")
    with open(os.path.join(cfg.out, "tracking.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["payload", "controller", "success", "mean_speed", "mean_height", "failure"])
        w.writerows(rows)


if __name__ == "__main__":
    main(parse_config(TrackingConfig, __doc__))
