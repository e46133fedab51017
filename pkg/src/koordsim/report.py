"""Report rendering: CSV tables and matplotlib figures for a finished run."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from koordsim.harness import RunResult, ScalingReport  # noqa: E402
from koordsim.monitors import SafetyResult, VisitResult  # noqa: E402
from koordsim.trace import KIND_POSE, TraceRecord, parse_pose  # noqa: E402


# --------------------------------------------------------------- CSV tables


def positions_csv(records: Sequence[TraceRecord]) -> str:
    lines = ["time,pid,x,y,z,yaw"]
    for rec in records:
        if rec.kind != KIND_POSE:
            continue
        x, y, z, yaw = parse_pose(rec.payload)
        lines.append(f"{rec.time!r},{rec.pid},{x!r},{y!r},{z!r},{yaw!r}")
    return "\n".join(lines) + "\n"


def distances_csv(safety: SafetyResult) -> str:
    lines = ["time,min_distance"]
    for t, d in zip(safety.times, safety.min_distances):
        lines.append(f"{t!r},{d!r}")
    return "\n".join(lines) + "\n"


def visits_csv(visits: VisitResult) -> str:
    lines = ["task,pid,t_start,t_end,dwell"]
    for v in visits.visits:
        lines.append(f"{v.task},{v.pid},{v.t_start!r},{v.t_end!r},{v.dwell()!r}")
    return "\n".join(lines) + "\n"


def metrics_text(result: RunResult) -> str:
    lines = [f"{k}: {v}" for k, v in result.metrics.items()]
    lines.append(f"verdict: {'PASS' if result.verdict else 'FAIL'}")
    if result.safety is not None:
        lines.append(f"safety: {'PASS' if result.safety.verdict else 'FAIL'}")
        if math.isfinite(result.safety.global_min):
            lines.append(f"min_pairwise_distance: {result.safety.global_min:.6g}")
    if result.visits is not None:
        lines.append(f"visits: {'PASS' if result.visits.verdict else 'FAIL'}")
        for p in result.visits.problems:
            lines.append(f"visit_problem: {p}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- figures


def fig_positions(records: Sequence[TraceRecord], out_path) -> None:
    """Top-down x-y trajectories, one line per robot."""
    by_pid: dict[int, tuple[list[float], list[float]]] = {}
    for rec in records:
        if rec.kind != KIND_POSE:
            continue
        x, y, _z, _yaw = parse_pose(rec.payload)
        xs, ys = by_pid.setdefault(rec.pid, ([], []))
        xs.append(x)
        ys.append(y)
    fig, ax = plt.subplots(figsize=(6, 5))
    for pid in sorted(by_pid):
        xs, ys = by_pid[pid]
        ax.plot(xs, ys, label=f"robot {pid}")
        if xs:
            ax.plot(xs[0], ys[0], "o", color=ax.lines[-1].get_color())
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title("Robot trajectories")
    ax.legend(loc="best", fontsize="small")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def fig_min_distance(safety: SafetyResult, d_s: float, out_path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(safety.times, safety.min_distances, label="min pairwise distance")
    ax.axhline(d_s, color="red", linestyle="--", label=f"d_s = {d_s:g} m")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("distance (m)")
    ax.set_title("Minimum pairwise separation")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def fig_scaling(report: ScalingReport, out_path) -> None:
    ns = [r.num_robots for r in report.rows]
    pps = [r.packets_per_s for r in report.rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(ns, pps, "o-", label="fleet packets/s")
    if report.exponent is not None and len(ns) >= 2 and pps[0] > 0:
        fit = [pps[0] * (n / ns[0]) ** report.exponent for n in ns]
        ax.loglog(ns, fit, "--", label=f"fit exponent {report.exponent:.2f}")
    ax.set_xlabel("fleet size N")
    ax.set_ylabel("packets/s")
    ax.set_title(f"Message rate scaling ({report.app})")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


# ------------------------------------------------------------ report bundles


def write_run_report(result: RunResult, out_dir) -> list[str]:
    """CSV tables plus rendered figures for one run; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def _write(name: str, text: str) -> None:
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(str(p))

    _write("positions.csv", positions_csv(result.records))
    _write("metrics.txt", metrics_text(result))
    fig_positions(result.records, out / "positions.png")
    written.append(str(out / "positions.png"))
    if result.safety is not None and result.safety.times:
        _write("min_distance.csv", distances_csv(result.safety))
        fig_min_distance(result.safety, result.config.d_s, out / "min_distance.png")
        written.append(str(out / "min_distance.png"))
    if result.visits is not None:
        _write("visits.csv", visits_csv(result.visits))
    return written


def write_scaling_report(report: ScalingReport, out_dir) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "scaling.csv"
    csv_path.write_text(report.csv(), encoding="utf-8")
    fig_scaling(report, out / "scaling.png")
    return [str(csv_path), str(out / "scaling.png")]
