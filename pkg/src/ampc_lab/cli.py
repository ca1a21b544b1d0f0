"""Command-line front end: ``ampc-lab {run,batch,sweep-payload,bench-qp,plot}``."""
import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import qp, simlab
from .ampc import Command, build_and_solve, build_reference
from .config import GRAVITY
from .linearize import OperatingPoint
from .regressor import build_h_stack, theta_from_params

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STRICT = 3


class ConfigError(Exception):
    pass


def _modes(mode):
    return list(simlab.CONTROLLERS) if mode == "both" else [mode]


def _add_common(p, modes=True):
    p.add_argument("--scenario", help="scenario JSON (a delta on the shipped defaults)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scenario field by dotted path, e.g. mpc.N=10; repeatable")
    if modes:
        p.add_argument("--mode", choices=("ampc", "baseline", "both"), default=None,
                       help="controller mode (default: the scenario's)")
    p.add_argument("--strict", action="store_true", help="exit 3 if any episode fails")
    p.add_argument("--echo-config", action="store_true",
                   help="print the effective scenario JSON before running")


def build_parser():
    parser = argparse.ArgumentParser(prog="ampc-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one episode and write telemetry plus plots")
    _add_common(p)
    p.add_argument("--seeds", type=int, default=None, help="episode seed")

    p = sub.add_parser("batch", help="run one episode per seed and aggregate")
    _add_common(p)
    p.add_argument("--seeds", default="10", help="seed count N (seeds 0..N-1) or a comma list")
    p.add_argument("--parallel", type=int, default=1, help="worker processes (capped by AMPC_LAB_THREADS)")
    p.add_argument("--terrain", choices=("flat", "rough"), default=None, help="terrain kind")

    p = sub.add_parser("sweep-payload", help="find the largest sustained static payload")
    _add_common(p)
    p.add_argument("--from", dest="start", type=float, default=0.0, help="first payload [kg]")
    p.add_argument("--to", dest="stop", type=float, default=18.0, help="last payload [kg]")
    p.add_argument("--step", type=float, default=0.5, help="payload increment [kg]")
    p.add_argument("--full", action="store_true", help="keep sweeping after the first failure")

    p = sub.add_parser("bench-qp", help="time the standing AMPC problem")
    _add_common(p, modes=False)
    p.add_argument("--repeats", type=int, default=200, help="number of timed solves")
    p.add_argument("--payload", type=float, default=0.0, help="payload mass in the model [kg]")

    p = sub.add_parser("plot", help="re-render SVGs from a telemetry or aggregate CSV")
    p.add_argument("--telemetry", help="telemetry CSV")
    p.add_argument("--aggregate", action="append", default=[], metavar="LABEL=PATH",
                   help="aggregate CSV with a label; repeatable")
    p.add_argument("--out", default="out", help="output directory")
    return parser


def _scenario(args):
    if args.scenario is not None and not os.path.isfile(args.scenario):
        raise ConfigError(f"scenario file not found: {args.scenario}")
    try:
        sc = simlab.load_scenario(args.scenario, args.overrides)
    except (KeyError, ValueError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        raise ConfigError(f"invalid configuration: {msg}") from exc
    if getattr(args, "terrain", None):
        sc = replace(sc, terrain=replace(sc.terrain, kind=args.terrain))
    if getattr(args, "mode", None) in simlab.CONTROLLERS:
        sc = replace(sc, controller=args.mode)
    if args.echo_config:
        print(json.dumps(sc.to_dict(), indent=2, sort_keys=True))
    return sc


def _write_config(sc, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "effective_config.json"), "w") as fh:
        json.dump(sc.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _summary(label, res):
    print(f"[{label}] seed={res.seed} {res.summary()}" + (f" failure={res.failure}" if res.failure else ""))


def cmd_run(args):
    sc = _scenario(args)
    if args.seeds is not None:
        sc = replace(sc, seed=args.seeds)
    modes = _modes(args.mode) if args.mode else [sc.controller]
    ok = True
    for mode in modes:
        run_sc = replace(sc, controller=mode)
        out = args.out if len(modes) == 1 else os.path.join(args.out, mode)
        _write_config(run_sc, out)
        tele, res = simlab.run_episode(run_sc)
        simlab.write_outputs(tele, out)
        _summary(mode, res)
        ok &= res.success
    return EXIT_STRICT if args.strict and not ok else EXIT_OK


def _seed_list(text):
    text = str(text)
    if "," in text:
        return [int(s) for s in text.split(",") if s.strip()]
    n = int(text)
    if n < 1:
        raise ConfigError("--seeds must be positive")
    return list(range(n))


def cmd_batch(args):
    sc = _scenario(args)
    try:
        seeds = _seed_list(args.seeds)
    except ValueError as exc:
        raise ConfigError(f"invalid --seeds: {exc}") from exc
    modes = _modes(args.mode) if args.mode else [sc.controller]
    batches = {}
    ok = True
    for mode in modes:
        run_sc = replace(sc, controller=mode)
        batch = simlab.run_batch(run_sc, seeds, args.parallel)
        for res in batch.results:
            _summary(mode, res)
        print(f"[{mode}] success_rate={batch.success_rate:.4f} episodes={len(batch.results)}")
        batches[mode] = batch
        ok &= all(r.success for r in batch.results)
    _write_config(sc, args.out)
    simlab.write_outputs(batches if len(batches) > 1 else next(iter(batches.values())), args.out)
    return EXIT_STRICT if args.strict and not ok else EXIT_OK


def payload_sweep(template, masses, stop_at_failure=True):
    """Run one episode per payload mass; returns rows and the max sustained payload.

    The max sustained payload is the largest mass reached without any failure
    at that mass or below it.
    """
    base_payload = template.payloads[0] if template.payloads else simlab.PayloadEvent()
    rows = []
    capacity = None
    failed = False
    for m in masses:
        pe = replace(base_payload, mass=float(m), time=0.0, mode="static")
        sc = replace(template, payloads=(pe,) if m > 0 else ())
        _, res = simlab.run_episode(sc)
        rows.append((float(m), res))
        if res.success and not failed:
            capacity = float(m)
        if not res.success:
            failed = True
            if stop_at_failure:
                break
    return rows, capacity


def cmd_sweep(args):
    sc = _scenario(args)
    if args.step <= 0 or args.stop < args.start:
        raise ConfigError("need --step > 0 and --to >= --from")
    n = int(np.floor((args.stop - args.start) / args.step + 1e-9)) + 1
    masses = [round(args.start + i * args.step, 10) for i in range(n)]
    os.makedirs(args.out, exist_ok=True)
    modes = _modes(args.mode) if args.mode else list(simlab.CONTROLLERS)
    caps = {}
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "payload", "success", "mean_speed", "mean_height", "failure"])
        for mode in modes:
            rows, cap = payload_sweep(replace(sc, controller=mode), masses, not args.full)
            for m, res in rows:
                w.writerow([mode, repr(m), int(res.success), repr(res.mean_speed),
                            repr(res.mean_height), res.failure])
                print(f"[{mode}] payload={m:g} {res.summary()}")
            caps[mode] = cap
    with open(os.path.join(args.out, "capacity.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "max_sustained_payload"])
        for mode, cap in caps.items():
            w.writerow([mode, "" if cap is None else repr(cap)])
            print(f"[{mode}] max_sustained_payload={cap}")
    _write_config(sc, args.out)
    return EXIT_OK


def standing_problem(sc, payload=0.0):
    """Standing AMPC inputs at the nominal height with the true model."""
    robot = sc.robot
    params = robot.params
    if payload > 0:
        params = replace(params, mass=params.mass + payload)
    feet = robot.hips.copy()
    feet[:, 2] = -robot.nominal_height
    stance = np.ones(4, dtype=bool)
    op = OperatingPoint(np.eye(3), np.zeros(3), np.zeros((4, 3)), feet, stance)
    cfg = sc.mpc
    h = build_h_stack(op, cfg.dt_pred, GRAVITY)
    ref = build_reference(Command(height=robot.nominal_height), cfg.N, cfg.dt_pred, 0.0,
                          robot.nominal_height)
    x0 = np.zeros(13)
    x0[12] = 1.0
    return x0, theta_from_params(params), h, stance, ref, cfg


def cmd_bench(args):
    sc = _scenario(args)
    x0, theta, h, stance, ref, cfg = standing_problem(sc, args.payload)
    build_and_solve(x0, theta, h, stance, ref, cfg, GRAVITY)  # compile and warm caches
    times, iters, statuses = [], [], []
    for _ in range(max(1, args.repeats)):
        sol = build_and_solve(x0, theta, h, stance, ref, cfg, GRAVITY)
        times.append(sol.diagnostics["solve_time"] * 1e3)
        iters.append(sol.diagnostics["iterations"])
        statuses.append(sol.status)
    os.makedirs(args.out, exist_ok=True)
    pct = {p: float(np.percentile(times, p)) for p in (50, 90, 99)}
    with open(os.path.join(args.out, "bench_qp.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["repeats", "p50_ms", "p90_ms", "p99_ms", "max_ms", "mean_iterations", "optimal_fraction"])
        w.writerow([len(times), pct[50], pct[90], pct[99], max(times), float(np.mean(iters)),
                    statuses.count(qp.OPTIMAL) / len(statuses)])
    print(f"qp solve p50={pct[50]:.3f} ms p90={pct[90]:.3f} ms p99={pct[99]:.3f} ms "
          f"iterations={np.mean(iters):.1f}")
    return EXIT_OK


def cmd_plot(args):
    if not args.telemetry and not args.aggregate:
        raise ConfigError("plot needs --telemetry and/or --aggregate")
    if args.telemetry:
        if not os.path.isfile(args.telemetry):
            raise ConfigError(f"telemetry file not found: {args.telemetry}")
        tele = simlab.Telemetry.from_csv(args.telemetry)
        simlab.write_outputs(tele, args.out)
    if args.aggregate:
        curves = {}
        for item in args.aggregate:
            label, _, path = item.rpartition("=")
            label = label or os.path.splitext(os.path.basename(path))[0]
            if not os.path.isfile(path):
                raise ConfigError(f"aggregate file not found: {path}")
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
            curves[label] = (data[:, 0], data[:, 1])
        os.makedirs(args.out, exist_ok=True)
        simlab.plots.plot_success(curves, os.path.join(args.out, "success.svg"))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "batch": cmd_batch, "sweep-payload": cmd_sweep,
            "bench-qp": cmd_bench, "plot": cmd_plot}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
