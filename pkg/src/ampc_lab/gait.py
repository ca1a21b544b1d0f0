"""Trot scheduling, Raibert footholds and heightmap terrain."""
from dataclasses import dataclass
import csv
import math

import numpy as np

from .srb import N_FEET

# foot order FR, FL, RR, RL; pair A = (FR, RL), pair B = (FL, RR)
PAIR_OF_FOOT = (0, 1, 1, 0)


@dataclass(frozen=True)
class GaitConfig:
    phase_duration: float = 0.3
    duty: float = 0.5
    pairing: tuple = PAIR_OF_FOOT
    k_v: float = 0.03

    def __post_init__(self):
        if not 0 < self.duty <= 1:
            raise ValueError("duty must be in (0, 1]")
        if not self.phase_duration > 0:
            raise ValueError("phase_duration must be positive")

    @property
    def period(self):
        return 2.0 * self.phase_duration

    @property
    def stance_time(self):
        return self.duty * self.period


def stance_flags(t, cfg):
    if cfg.duty >= 1.0:
        return np.ones(N_FEET, dtype=bool)
    # round so ticks that land on a phase boundary are not split by float noise
    cycles = round(t / cfg.period, 12)
    flags = np.empty(N_FEET, dtype=bool)
    for j, pair in enumerate(cfg.pairing):
        phase = (cycles - 0.5 * pair) % 1.0
        flags[j] = phase < cfg.duty
    return flags


def contact_schedule(t, cfg, N, T_s):
    """Stance flags now and for each of the ``N`` horizon steps.

    The horizon reuses the current stance set; ``T_s`` is accepted so the
    signature matches a schedule that would look ahead.
    """
    now = stance_flags(t, cfg)
    del T_s
    return now, np.tile(now, (N, 1))


@dataclass(frozen=True)
class Terrain:
    """Heightmap on a regular grid; queries outside the grid clamp to the edge."""

    heights: np.ndarray
    cell: float
    origin: tuple = (0.0, 0.0)
    seed: int = None

    def __post_init__(self):
        h = np.array(self.heights, dtype=float)
        if h.ndim != 2 or not np.all(np.isfinite(h)):
            raise ValueError("terrain heights must be a finite 2-D grid")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)

    @property
    def extent(self):
        nx, ny = self.heights.shape
        x0, y0 = self.origin
        return (x0, x0 + nx * self.cell, y0, y0 + ny * self.cell)

    def height(self, x, y):
        nx, ny = self.heights.shape
        i = min(max(int(math.floor((x - self.origin[0]) / self.cell)), 0), nx - 1)
        k = min(max(int(math.floor((y - self.origin[1]) / self.cell)), 0), ny - 1)
        return float(self.heights[i, k])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["# cell", self.cell, "origin_x", self.origin[0], "origin_y", self.origin[1],
                        "seed", "" if self.seed is None else self.seed])
            for row in self.heights:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        meta = rows[0]
        seed = int(meta[7]) if meta[7] != "" else None
        heights = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(heights, float(meta[1]), (float(meta[3]), float(meta[5])), seed)


def flat_terrain(length=10.0, width=2.0, cell=0.05):
    nx = int(math.ceil((length + 2.0) / cell))
    ny = int(math.ceil(width / cell))
    return Terrain(np.zeros((nx, ny)), cell, (-1.0, -0.5 * width))


def generate_terrain(seed, length=10.0, block_height=0.05, density=0.3, width=2.0, cell=0.05,
                     block_size=(0.15, 0.4), clear_start=0.6):
    """Scatter axis-aligned blocks of one height over a flat course.

    ``density`` is the target fraction of the course area covered by blocks.
    Blocks never stack, so neighbouring cells differ by 0 or ``block_height``.
    The first ``clear_start`` metres stay flat so episodes start on level ground.
    """
    base = flat_terrain(length, width, cell)
    heights = np.zeros(base.heights.shape)
    nx, ny = heights.shape
    rng = np.random.default_rng(seed)
    start_i = int(round((clear_start + 1.0) / cell))
    target = density * (nx - start_i) * ny
    covered = 0
    attempts = 0
    while covered < target and attempts < 100000:
        attempts += 1
        sx = max(1, int(round(rng.uniform(*block_size) / cell)))
        sy = max(1, int(round(rng.uniform(*block_size) / cell)))
        i = int(rng.integers(start_i, max(start_i + 1, nx - sx + 1)))
        k = int(rng.integers(0, max(1, ny - sy + 1)))
        patch = heights[i:i + sx, k:k + sy]
        covered += int(np.count_nonzero(patch == 0))
        patch[...] = block_height
    return Terrain(heights, cell, base.origin, seed)


def raibert_foothold(hip_pos, v, v_des, T_stance, terrain, k_v=0.03):
    hip_pos = np.asarray(hip_pos, dtype=float)
    v = np.asarray(v, dtype=float)
    v_des = np.asarray(v_des, dtype=float)
    xy = hip_pos[:2] + 0.5 * T_stance * v[:2] + k_v * (v[:2] - v_des[:2])
    z = 0.0 if terrain is None else terrain.height(xy[0], xy[1])
    return np.array([xy[0], xy[1], z])
