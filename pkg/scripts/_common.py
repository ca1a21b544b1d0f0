"""Dataclass-driven argument parsing shared by the experiment scripts."""
import argparse
import dataclasses
import json
import os

SCENARIOS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "scenarios")


def parse_config(cls, description):
    """Build a parser with one ``--field`` flag per dataclass field and return an instance."""
    parser = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            parser.add_argument(flag, type=lambda s: s.lower() in ("1", "true", "yes"), default=default)
        elif isinstance(default, (list, tuple)):
            parser.add_argument(flag, type=json.loads, default=default, help="JSON list")
        else:
            parser.add_argument(flag, type=type(default), default=default)
    args = vars(parser.parse_args())
    return cls(**args)


def scenario_path(name):
    return name if os.path.exists(name) else os.path.join(SCENARIOS, name)
