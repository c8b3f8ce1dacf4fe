"""CSV/JSON writers and matplotlib figures for run outputs."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .cost import CostBreakdown, CostWeights
from .epidemic import Trajectory
from .policy import PolicySchedule

WAVE_FLOOR = 1e-4


def fmt(x: float) -> str:
    return f"{x:.10g}"


def round10(x):
    """Round floats (recursively) to 10 significant digits for JSON output."""
    if isinstance(x, (float, np.floating)):
        return float(fmt(float(x)))
    if isinstance(x, Mapping):
        return {k: round10(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round10(v) for v in x]
    return x


def count_waves(i: np.ndarray, floor: float = WAVE_FLOOR) -> int:
    """Number of interior local maxima of ``i`` above ``floor``."""
    i = np.asarray(i)
    if len(i) < 3:
        return 0
    mid = i[1:-1]
    peaks = (mid > i[:-2]) & (mid >= i[2:]) & (mid > floor)
    return int(peaks.sum())


def trajectory_summary(traj: Trajectory) -> dict:
    fin = traj.final()
    return {
        "s_final": fin.s,
        "i_final": fin.i,
        "r_final": fin.r,
        "peak_i": float(traj.i.max()),
        "peak_day": int(traj.i.argmax()),
        "waves": count_waves(traj.i),
    }


def write_trajectories(path: Path, trajectories: Mapping[str, Trajectory]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "region", "s", "i", "r", "u"])
        for region, traj in trajectories.items():
            for day, (s, i, r) in enumerate(traj.states):
                u = traj.intensities[day] if day < traj.horizon else 1.0
                w.writerow([day, region, fmt(s), fmt(i), fmt(r), fmt(u)])


def write_schedules(path: Path, schedules: Mapping[str, PolicySchedule]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "start_day", "end_day", "intensity"])
        for region, sched in schedules.items():
            for start, stop, a in sched.segments():
                w.writerow([region, start, stop, fmt(a)])


def read_schedules(path: Path) -> dict[str, list[tuple[int, int, float]]]:
    out: dict[str, list[tuple[int, int, float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["region"], []).append(
                (int(row["start_day"]), int(row["end_day"]), float(row["intensity"])))
    return out


def write_costs(path: Path, rows: Iterable[tuple[str, CostWeights, CostBreakdown]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "kappa", "eta", "implementation", "impact", "non_compliance", "total"])
        for region, weights, cost in rows:
            w.writerow([region, fmt(weights.kappa), fmt(weights.eta), fmt(cost.implementation),
                        fmt(cost.impact), fmt(cost.non_compliance), fmt(cost.total)])


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(round10(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_jsonl(path: Path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(round10(rec), sort_keys=True) + "\n")


def render_figure(path: Path, trajectories: Mapping[str, Trajectory], schedules: Mapping[str, PolicySchedule],
                  herd: float | None = None, title: str | None = None) -> None:
    """One panel per leaf region: s, i, r against day with the policy overlaid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = len(trajectories)
    fig, axes = plt.subplots(n, 1, figsize=(6.4, 2.6 * n), sharex=True, squeeze=False)
    for ax, (region, traj) in zip(axes[:, 0], trajectories.items()):
        days = np.arange(len(traj.states))
        last = _plot_extent(traj)
        ax.plot(days[:last], traj.s[:last], color="tab:blue", label="S")
        ax.plot(days[:last], traj.i[:last], color="tab:red", label="I")
        ax.plot(days[:last], traj.r[:last], color="tab:green", label="R")
        u = np.append(traj.intensities, 1.0)
        ax.step(days[:last], u[:last], where="post", color="k", lw=1.0, ls="--", label="policy")
        if herd is not None:
            ax.axhline(herd, color="grey", lw=0.6, ls=":", label="herd threshold")
        ax.set_ylim(-0.02, 1.02)
        ax.set_ylabel("fraction")
        ax.set_title(region if region not in schedules or title is None else f"{title}: {region}", fontsize=9)
    axes[0, 0].legend(fontsize=7, loc="center right")
    axes[-1, 0].set_xlabel("day")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_extent(traj: Trajectory, quiet: float = 1e-6) -> int:
    """Trim the quiescent tail so long horizons do not flatten the plot."""
    active = np.nonzero(traj.i > quiet)[0]
    last_ctrl = np.nonzero(traj.intensities < 1.0)[0]
    end = max(active[-1] if len(active) else 0, last_ctrl[-1] if len(last_ctrl) else 0)
    return int(min(len(traj.states), end + 30))
