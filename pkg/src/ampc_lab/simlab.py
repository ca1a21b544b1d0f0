"""Closed-loop episodes, batches, telemetry and plots."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import io
import json
import math
import os
import traceback

import numpy as np

from . import plots, qp
from .ampc import AmpcController, Command, MpcConfig, baseline_mode
from .config import GRAVITY, RobotConfig, from_dict, load_defaults, to_jsonable
from .gait import (GaitConfig, flat_terrain, generate_terrain, raibert_foothold,
                   stance_flags)
from .regressor import N_THETA, theta_labels
from .rotations import roll_pitch_yaw, rotz
from .srb import N_FEET, FootSet, PayloadSpec, RigidBodyState, combine_payload, integrate_step

TELEMETRY_SCHEMA_VERSION = 1
CONTROLLERS = ("ampc", "baseline")
FRICTION_TOL = 1e-6


@dataclass(frozen=True)
class TerrainConfig:
    kind: str = "flat"
    length: float = 10.0
    width: float = 2.0
    cell: float = 0.05
    block_height: float = 0.05
    density: float = 0.3
    seed: int = -1  # -1 follows the scenario seed

    def __post_init__(self):
        if self.kind not in ("flat", "rough"):
            raise ValueError("terrain kind must be 'flat' or 'rough'")

    def build(self, scenario_seed):
        if self.kind == "flat":
            return flat_terrain(self.length, self.width, self.cell)
        seed = scenario_seed if self.seed < 0 else self.seed
        return generate_terrain(seed, self.length, self.block_height, self.density,
                                self.width, self.cell)


@dataclass(frozen=True)
class SimConfig:
    plant_rate: float = 1000.0
    fall_angle: float = 0.5
    fall_height: float = 0.12
    sag_height: float = 0.20
    sag_duration: float = 1.0
    settle_time: float = 1.0
    measurement_noise: float = 0.0


@dataclass(frozen=True)
class CommandSegment:
    """Command active from ``time``; it is reached linearly over ``ramp`` seconds."""

    time: float = 0.0
    v_des: tuple = (0.0, 0.0, 0.0)
    yaw_rate: float = 0.0
    height: float = 0.26
    ramp: float = 0.0


@dataclass(frozen=True)
class PayloadEvent:
    time: float = 0.0
    mass: float = 0.0
    offset: tuple = (0.0, 0.0, 0.0)
    inertia: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    mode: str = "static"

    def __post_init__(self):
        if self.mode not in ("static", "dynamic"):
            raise ValueError("payload mode must be 'static' or 'dynamic'")
        if self.mode == "static" and self.time != 0.0:
            raise ValueError("static payloads are attached at time 0")

    @property
    def spec(self):
        return PayloadSpec(self.mass, np.array(self.offset), np.array(self.inertia))


@dataclass(frozen=True)
class PushEvent:
    time: float = 0.0
    duration: float = 0.2
    force: tuple = (0.0, 100.0, 0.0)


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    duration: float = 10.0
    distance_target: float = -1.0  # <= 0 disables the distance stop
    controller: str = "ampc"
    seed: int = 0
    terrain: TerrainConfig = TerrainConfig()
    commands: tuple = (CommandSegment(),)
    payloads: tuple = ()
    pushes: tuple = ()
    mpc: MpcConfig = MpcConfig()
    gait: GaitConfig = GaitConfig()
    sim: SimConfig = SimConfig()
    robot: RobotConfig = RobotConfig()

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.commands:
            raise ValueError("at least one command segment is required")
        times = [e.time for e in (*self.commands, *self.payloads, *self.pushes)]
        if any(t < 0 or t > self.duration for t in times):
            raise ValueError("event times must lie within the episode duration")
        if self.commands[0].time != 0.0:
            raise ValueError("the first command segment must start at time 0")
        for p in self.payloads:
            p.spec  # validates
        for p in self.pushes:
            if p.duration < 0 or len(p.force) != 3:
                raise ValueError("push needs a non-negative duration and a 3-vector force")

    def to_dict(self):
        return to_jsonable(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        valid = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - valid)
        if unknown:
            raise KeyError(f"unknown Scenario keys {unknown}; valid keys: {sorted(valid)}")
        nested = {"terrain": TerrainConfig, "mpc": MpcConfig, "gait": GaitConfig,
                  "sim": SimConfig, "robot": RobotConfig}
        lists = {"commands": CommandSegment, "payloads": PayloadEvent, "pushes": PushEvent}
        kwargs = {}
        for key, value in data.items():
            if key in nested:
                kwargs[key] = from_dict(nested[key], value)
            elif key in lists:
                kwargs[key] = tuple(from_dict(lists[key], v) for v in value)
            else:
                kwargs[key] = from_dict(_Scalars, {key: value}).__dict__[key]
        return cls(**kwargs)


@dataclass(frozen=True)
class _Scalars:
    name: str = "scenario"
    duration: float = 10.0
    distance_target: float = -1.0
    controller: str = "ampc"
    seed: int = 0


def command_at(t, commands):
    """Piecewise command with linear ramps between segments."""
    prev = commands[0]
    active = commands[0]
    for seg in commands:
        if seg.time <= t + 1e-12:
            prev, active = active, seg
    if active is commands[0] or active.ramp <= 0 or t >= active.time + active.ramp:
        return Command(tuple(active.v_des), active.yaw_rate, active.height)
    a = (t - active.time) / active.ramp
    mix = lambda p, q: (1 - a) * p + a * q
    v = tuple(mix(np.array(prev.v_des, float), np.array(active.v_des, float)))
    return Command(v, mix(prev.yaw_rate, active.yaw_rate), mix(prev.height, active.height))


# ---------------------------------------------------------------- telemetry

def telemetry_columns():
    cols = ["schema_version", "time", "tick"]
    cols += [f"r_{a}" for a in "xyz"] + [f"v_{a}" for a in "xyz"]
    cols += ["roll", "pitch", "yaw"] + [f"omega_{a}" for a in "xyz"]
    cols += ["height", "ground", "v_des_x", "v_des_y", "yaw_rate_des", "height_des"]
    cols += [f"x0_{i}" for i in range(13)]
    cols += [f"u_{j}_{a}" for j in range(N_FEET) for a in "xyz"]
    cols += [f"stance_{j}" for j in range(N_FEET)]
    cols += [f"xpred_{i}" for i in range(13)] + [f"xtilde_{i}" for i in range(13)]
    cols += ["xtilde_norm", "mass_true", "mass_hat"]
    cols += [f"theta_{lbl}" for lbl in theta_labels()]
    cols += ["lambda_max", "stability_margin", "qp_status", "qp_iterations", "qp_kkt",
             "fallback", "update_skipped", "push_x", "push_y", "push_z", "event"]
    return cols


@dataclass
class Telemetry:
    columns: list = field(default_factory=telemetry_columns)
    rows: list = field(default_factory=list)
    schema_version: int = TELEMETRY_SCHEMA_VERSION

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self, path_or_buf):
        def fmt(v):
            if isinstance(v, (float, np.floating)):
                return repr(float(v))
            return str(v)
        own = isinstance(path_or_buf, (str, os.PathLike))
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([fmt(v) for v in row])
        finally:
            if own:
                fh.close()

    def csv_text(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            columns = next(reader)
            rows = []
            for raw in reader:
                row = []
                for v in raw:
                    try:
                        row.append(float(v))
                    except ValueError:
                        row.append(v)
                rows.append(row)
        return cls(columns, rows)


@dataclass
class EpisodeResult:
    success: bool
    distance: float
    mean_speed: float
    mean_height: float
    fall_time: float = math.nan
    final_mass_error: float = math.nan
    failure: str = ""
    seed: int = 0
    controller: str = "ampc"
    duration: float = 0.0
    fallbacks: int = 0
    hygiene_violations: int = 0
    min_stability_margin: float = math.nan

    def summary(self):
        return (f"success={self.success} mean_speed={self.mean_speed:.4f} "
                f"mean_height={self.mean_height:.4f} final_mass_error={self.final_mass_error:.4f}")


def friction_ok(u, stance, mu, f_z_min=0.0, tol=FRICTION_TOL):
    """Independent check of applied GRFs: swing zero, f_z >= 0, pyramid."""
    u = np.asarray(u, dtype=float).reshape(N_FEET, 3)
    for j in range(N_FEET):
        fx, fy, fz = u[j]
        if not stance[j]:
            if np.any(np.abs(u[j]) > tol):
                return False
            continue
        if fz < -tol or abs(fx) > mu * fz + tol or abs(fy) > mu * fz + tol:
            return False
    return True


# ---------------------------------------------------------------- episodes

def _initial_state(robot, terrain, shift):
    ground = terrain.height(0.0, 0.0)
    r = np.array([0.0, 0.0, ground + robot.nominal_height]) + shift
    state = RigidBodyState(r, np.zeros(3), np.eye(3), np.zeros(3))
    feet = np.empty((N_FEET, 3))
    for j, hip in enumerate(robot.hips):
        x, y = hip[0], hip[1]
        feet[j] = (x, y, terrain.height(x, y))
    return state, feet


def _push_force(t, pushes):
    f = np.zeros(3)
    for p in pushes:
        if p.time <= t < p.time + p.duration:
            f += np.asarray(p.force, dtype=float)
    return f


def run_episode(scenario):
    """Simulate one episode; returns ``(Telemetry, EpisodeResult)``."""
    sc = scenario
    cfg = sc.mpc if sc.controller == "ampc" else baseline_mode(sc.mpc)
    robot = sc.robot
    nominal = robot.params
    terrain = sc.terrain.build(sc.seed)
    rng = np.random.default_rng(sc.seed)

    # the plant carries the true inertial params; the controller only the nominal ones
    plant = nominal
    com_shift = np.zeros(3)
    for p in sc.payloads:
        if p.mode == "static":
            plant, s = combine_payload(plant, robot.nominal_height + com_shift[2], p.spec)
            com_shift = com_shift + s
    state, feet = _initial_state(robot, terrain, com_shift)
    hips = robot.hips - com_shift  # hip offsets from the combined COM
    dynamic = sorted((p for p in sc.payloads if p.mode == "dynamic"), key=lambda p: p.time)

    controller = AmpcController(cfg, nominal, GRAVITY, robot.nominal_height)
    T_s = cfg.T_s
    n_sub = max(1, int(math.ceil(T_s * sc.sim.plant_rate - 1e-9)))
    dt = T_s / n_sub
    n_ticks = int(round(sc.duration / T_s))

    tele = Telemetry()
    x_start = state.r.copy()
    prev_stance = np.ones(N_FEET, dtype=bool)
    sag_since = None
    fall_time, failure = math.nan, ""
    speeds, heights = [], []
    fallbacks = violations = 0
    min_margin = math.inf
    next_dyn = 0
    reached = False
    mass_hat = nominal.mass

    for k in range(n_ticks):
        t = k * T_s
        event = []
        while next_dyn < len(dynamic) and dynamic[next_dyn].time <= t + 1e-12:
            ev = dynamic[next_dyn]
            plant, s = combine_payload(plant, state.r[2] - _ground(feet), ev.spec)
            state = replace(state, r=state.r + state.R @ s)
            hips = hips - s
            event.append(f"payload+{ev.mass:g}")
            next_dyn += 1
        for p in sc.pushes:
            if abs(p.time - t) < 0.5 * T_s:
                event.append("push")

        cmd = command_at(t, sc.commands)
        stance = stance_flags(t, sc.gait)
        yaw = roll_pitch_yaw(state.R)[2]
        v_des_world = rotz(yaw) @ np.asarray(cmd.v_des, dtype=float)
        for j in range(N_FEET):
            if stance[j] and not prev_stance[j]:
                hip_world = state.r + state.R @ hips[j]
                feet[j] = raibert_foothold(hip_world, state.v, v_des_world,
                                           sc.gait.stance_time, terrain, sc.gait.k_v)
        prev_stance = stance
        ground = _ground(feet)

        measured = state
        if sc.sim.measurement_noise > 0:
            noise = rng.normal(0.0, sc.sim.measurement_noise, 6)
            measured = replace(state, r=state.r + noise[:3], v=state.v + noise[3:])
        u0, info = controller.tick(measured, feet, stance, cmd, ground)
        sol = info["solution"]
        fallbacks += info["fallback"]
        if not friction_ok(u0, stance, cfg.mu):
            violations += 1
        mass_hat = _mass_hat(info["theta"])
        min_margin = min(min_margin, info["margin"])

        push = _push_force(t, sc.pushes)
        rpy = roll_pitch_yaw(state.R)
        height = state.r[2] - ground
        xt = info["x_tilde"]
        row = [TELEMETRY_SCHEMA_VERSION, t, k, *state.r, *state.v, *rpy, *state.omega,
               height, ground, *v_des_world[:2], cmd.yaw_rate, cmd.height, *info["x0"],
               *u0.ravel(), *stance.astype(int), *info["x_pred"], *xt,
               float(np.linalg.norm(xt)) if np.all(np.isfinite(xt)) else math.nan,
               plant.mass, mass_hat, *info["theta"], info["lambda_max"], info["margin"],
               sol.status, 
               sol.diagnostics.get("iterations", 0), sol.diagnostics.get("kkt", math.nan),
               int(info["fallback"]),
               int(info["update_skipped"]), *push, ";".join(event)]
        tele.rows.append(row)

        # zero-order hold over the plant substeps; pushes resolved per substep
        foot_set = FootSet(feet, stance)
        try:
            sub = 0
            while sub < n_sub:
                f = _push_force(t + sub * dt, sc.pushes)
                run = 1
                while sub + run < n_sub and np.array_equal(_push_force(t + (sub + run) * dt, sc.pushes), f):
                    run += 1
                state = integrate_step(state, u0, foot_set, plant, dt, GRAVITY,
                                       external_force=f, n_steps=run)
                sub += run
        except ValueError as exc:
            fall_time, failure = t, f"integration error: {exc}"
            break

        t_next = (k + 1) * T_s
        ground = _ground(feet)
        height = state.r[2] - ground
        roll, pitch, _ = roll_pitch_yaw(state.R)
        if t_next >= sc.sim.settle_time:
            speeds.append(float(state.v @ (rotz(yaw) @ _unit_x(cmd))))
            heights.append(height)
        if abs(roll) > sc.sim.fall_angle or abs(pitch) > sc.sim.fall_angle:
            fall_time, failure = t_next, "fall: attitude"
            break
        if height < sc.sim.fall_height:
            fall_time, failure = t_next, "fall: height"
            break
        if height < sc.sim.sag_height:
            sag_since = t_next if sag_since is None else sag_since
            if t_next - sag_since >= sc.sim.sag_duration - 1e-12:
                fall_time, failure = t_next, "height collapse"
                break
        else:
            sag_since = None
        if sc.distance_target > 0 and state.r[0] - x_start[0] >= sc.distance_target:
            reached = True
            break

    distance = float(state.r[0] - x_start[0])
    success = not failure
    mass_err = abs(mass_hat - plant.mass) / plant.mass
    result = EpisodeResult(
        success=success, distance=distance,
        mean_speed=float(np.mean(speeds)) if speeds else math.nan,
        mean_height=float(np.mean(heights)) if heights else math.nan,
        fall_time=fall_time, final_mass_error=float(mass_err), failure=failure,
        seed=sc.seed, controller=sc.controller,
        duration=float(len(tele.rows) * T_s) if not reached else float((k + 1) * T_s),
        fallbacks=int(fallbacks), hygiene_violations=int(violations),
        min_stability_margin=float(min_margin) if tele.rows else math.nan)
    return tele, result


def _ground(feet):
    return float(np.mean(feet[:, 2]))


def _unit_x(cmd):
    v = np.asarray(cmd.v_des, dtype=float)
    n = math.hypot(v[0], v[1])
    return np.array([1.0, 0.0, 0.0]) if n == 0 else np.array([v[0] / n, v[1] / n, 0.0])


def _mass_hat(theta):
    return 1.0 / theta[1] if theta[1] > 0 else math.nan


# ---------------------------------------------------------------- batches

DISTANCE_GRID_STEP = 0.5


@dataclass
class BatchResult:
    results: list
    distance_grid: np.ndarray
    success_curve: np.ndarray

    @property
    def success_rate(self):
        return float(np.mean([r.success for r in self.results])) if self.results else math.nan

    def to_csv(self, path_or_buf):
        own = isinstance(path_or_buf, (str, os.PathLike))
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["distance", "success_rate"])
            for d, s in zip(self.distance_grid, self.success_curve):
                w.writerow([repr(float(d)), repr(float(s))])
        finally:
            if own:
                fh.close()

    def results_csv(self, path_or_buf):
        names = list(EpisodeResult.__dataclass_fields__)
        own = isinstance(path_or_buf, (str, os.PathLike))
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for r in self.results:
                w.writerow([repr(v) if isinstance(v, float) else v
                            for v in (getattr(r, n) for n in names)])
        finally:
            if own:
                fh.close()


def _episode_worker(scenario):
    try:
        return run_episode(scenario)[1]
    except Exception as exc:  # captured as a failed episode
        return EpisodeResult(False, 0.0, math.nan, math.nan, 0.0, math.nan,
                             f"error: {exc!r} {traceback.format_exc(limit=2)!s}",
                             scenario.seed, scenario.controller)


def max_workers(requested):
    cap = os.environ.get("AMPC_LAB_THREADS")
    n = max(1, int(requested))
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def success_curve(results, grid):
    """Fraction of episodes that travelled at least each grid distance without failing."""
    if not results:
        return np.zeros(len(grid))
    reach = np.array([math.inf if r.success else r.distance for r in results])
    return np.array([float(np.mean(reach >= d - 1e-12)) for d in grid])


def run_batch(template, seeds, parallelism=1):
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    scenarios = [replace(template, seed=s) for s in sorted(seeds)]
    workers = max_workers(parallelism)
    if workers == 1:
        results = [_episode_worker(s) for s in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_episode_worker, scenarios))
    results.sort(key=lambda r: r.seed)
    length = template.distance_target if template.distance_target > 0 else template.terrain.length
    grid = np.round(np.arange(0.0, length + 1e-9, DISTANCE_GRID_STEP), 10)
    return BatchResult(results, grid, success_curve(results, grid))


# ---------------------------------------------------------------- outputs

TELEMETRY_PLOTS = ("tracking.svg", "grf.svg", "mass.svg", "success.svg")


def _check_dir(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir} is not writable")


def write_outputs(data, out_dir, prefix=""):
    """Write CSV and SVG artifacts for a :class:`Telemetry`, a
    :class:`BatchResult` or a dict of labelled batch results; returns the paths."""
    _check_dir(out_dir)
    path = lambda name: os.path.join(out_dir, prefix + name)
    written = []
    if isinstance(data, Telemetry):
        data.to_csv(path("telemetry.csv"))
        plots.plot_tracking(data, path("tracking.svg"))
        plots.plot_grf(data, path("grf.svg"))
        plots.plot_mass(data, path("mass.svg"))
        plots.plot_success({"episode": _episode_curve(data)}, path("success.svg"))
        written = [path("telemetry.csv")] + [path(n) for n in TELEMETRY_PLOTS]
    else:
        batches = data if isinstance(data, dict) else {"batch": data}
        curves = {}
        for label, batch in batches.items():
            tag = "" if len(batches) == 1 else f"{label}_"
            batch.to_csv(path(f"{tag}aggregate.csv"))
            batch.results_csv(path(f"{tag}results.csv"))
            written += [path(f"{tag}aggregate.csv"), path(f"{tag}results.csv")]
            curves[label] = (batch.distance_grid, batch.success_curve)
        plots.plot_success(curves, path("success.svg"))
        written.append(path("success.svg"))
    return written


def _episode_curve(tele):
    """Success-vs-distance step for one episode: 1 up to the distance covered."""
    if not tele.rows:
        return np.zeros(1), np.zeros(1)
    x = tele.column("r_x")
    covered = float(x[-1] - x[0])
    grid = np.round(np.arange(0.0, max(covered, 0.0) + DISTANCE_GRID_STEP, DISTANCE_GRID_STEP), 10)
    return grid, (grid <= covered + 1e-12).astype(float)


# ---------------------------------------------------------------- scenario files

def deep_merge(base, delta):
    out = dict(base)
    for key, value in delta.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def valid_override_keys(template=None):
    """Dotted keys accepted by :func:`apply_overrides`."""
    data = (template or Scenario()).to_dict()
    keys = []
    for key, value in data.items():
        if isinstance(value, dict):
            keys += [f"{key}.{sub}" for sub in value]
        else:
            keys.append(key)
    return sorted(keys)


def apply_overrides(data, overrides):
    """Apply ``key=value`` strings (dotted paths, JSON values) to a scenario dict."""
    valid = set(valid_override_keys(Scenario.from_dict(data)))
    data = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise KeyError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in valid:
            raise KeyError(f"unknown override key {key!r}; valid keys: {', '.join(sorted(valid))}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
    return data


def load_scenario(path=None, overrides=(), defaults=None):
    """Scenario from a JSON delta on the shipped defaults plus overrides."""
    base = load_defaults() if defaults is None else defaults
    delta = {}
    if path is not None:
        with open(path) as fh:
            delta = json.load(fh)
        if not isinstance(delta, dict):
            raise ValueError("scenario file must hold a JSON object")
    data = apply_overrides(deep_merge(base, delta), overrides)
    return Scenario.from_dict(data)
