"""Seeded rough-terrain batch for both controllers with success-vs-distance curves."""
import os
from dataclasses import dataclass, replace

from ampc_lab import simlab
from _common import parse_config, scenario_path


@dataclass
class RoughConfig:
    scenario: str = "rough_6p5kg.json"
    seeds: int = 100
    parallel: int = os.cpu_count() or 1
    out: str = "out/rough"


def main(cfg):
    template = simlab.load_scenario(scenario_path(cfg.scenario))
    batches = {mode: simlab.run_batch(replace(template, controller=mode), range(cfg.seeds), cfg.parallel)
               for mode in simlab.CONTROLLERS}
    simlab.write_outputs(batches, cfg.out)
    for mode, b in batches.items():
        print(f"{mode}: success {100 * b.success_rate:.1f}% over {len(b.results)} seeds")


if __name__ == "__main__":
    main(parse_config(RoughConfig, __doc__))
