"""Deterministic SVG line plots for telemetry and batch aggregates."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

MARGIN = 0.05

_RC = {
    "svg.hashsalt": "ampc-lab",
    "svg.fonttype": "path",
    "path.simplify": False,
    "figure.figsize": (7.0, 4.0),
}


def padded_limits(*series, margin=MARGIN):
    """Range covering every finite value plus ``margin`` of the span on each side."""
    vals = np.concatenate([np.asarray(s, dtype=float).ravel() for s in series] or [np.zeros(0)])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return (-1.0, 1.0)
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo
    if span == 0:
        span = max(abs(lo), 1.0)
    return (lo - margin * span, hi + margin * span)


def _save(fig, path):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        plt.close(fig)
        raise OSError(f"cannot write plot to {path}")
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def _axes(ax, x, ys, xlabel, ylabel, title=None):
    ax.set_xlim(*padded_limits(x))
    ax.set_ylim(*padded_limits(*ys))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, linewidth=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best", fontsize="small")


def _event_lines(ax, times, events):
    for t, ev in zip(times, events):
        if ev:
            ax.axvline(t, color="0.5", linestyle=":", linewidth=0.8)


def plot_tracking(tele, path):
    t = tele.column("time")
    v = tele.column("v_x")
    v_des = tele.column("v_des_x")
    h = tele.column("height")
    h_des = tele.column("height_des")
    with plt.rc_context(_RC):
        fig, (a1, a2) = plt.subplots(2, 1, sharex=False)
        a1.plot(t, v, label="forward speed")
        a1.plot(t, v_des, "--", label="desired speed")
        _axes(a1, t, [v, v_des], "time [s]", "speed [m/s]")
        a2.plot(t, h, label="COM height")
        a2.plot(t, h_des, "--", label="desired height")
        _axes(a2, t, [h, h_des], "time [s]", "height [m]")
        fig.tight_layout()
        _save(fig, path)


def plot_grf(tele, path, foot=0):
    t = tele.column("time")
    fz = tele.column(f"u_{foot}_z")
    names = ("FR", "FL", "RR", "RL")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(t, fz, label=f"{names[foot]} vertical GRF")
        _axes(ax, t, [fz], "time [s]", "force [N]")
        fig.tight_layout()
        _save(fig, path)


def plot_mass(tele, path):
    t = tele.column("time")
    m_hat = tele.column("mass_hat")
    m_true = tele.column("mass_true")
    events = tele.column("event") if tele.rows else np.zeros(0)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(t, m_hat, label="estimated mass")
        ax.step(t, m_true, where="post", linestyle="--", label="true mass")
        _event_lines(ax, t, events)
        _axes(ax, t, [m_hat, m_true], "time [s]", "mass [kg]")
        fig.tight_layout()
        _save(fig, path)


def plot_success(curves, path):
    """``curves`` maps a label to ``(distance_grid, success_rate)``."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        xs, ys = [], []
        for label, (grid, rate) in curves.items():
            pct = 100.0 * np.asarray(rate, dtype=float)
            ax.step(grid, pct, where="post", label=label)
            xs.append(grid)
            ys.append(pct)
        if not curves:
            xs, ys = [np.zeros(1)], [np.zeros(1)]
        _axes(ax, np.concatenate(xs), ys, "distance [m]", "success rate [%]")
        fig.tight_layout()
        _save(fig, path)
