"""Trace-driven monitors: pairwise separation and task-visit verification."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from koordsim.trace import KIND_EVENT, KIND_POSE, TraceRecord, parse_pose
from koordsim.values import Pos


@dataclass
class SafetyResult:
    verdict: bool
    times: list[float]
    min_distances: list[float]  # min pairwise distance at each sample
    global_min: float
    first_violation: Optional[tuple[float, int, int]] = None  # (time, pid_a, pid_b)


@dataclass
class Visit:
    task: int
    pid: int
    t_start: float
    t_end: float

    def dwell(self) -> float:
        return self.t_end - self.t_start


@dataclass
class VisitResult:
    verdict: bool
    visits: list[Visit]
    claims: dict[int, list[int]]  # task index -> claiming pids (from events)
    problems: list[str] = field(default_factory=list)


def _pose_series(records: Sequence[TraceRecord]) -> dict[int, tuple[list[float], list[Pos]]]:
    series: dict[int, tuple[list[float], list[Pos]]] = {}
    for rec in records:
        if rec.kind != KIND_POSE:
            continue
        x, y, z, _yaw = parse_pose(rec.payload)
        times, points = series.setdefault(rec.pid, ([], []))
        times.append(rec.time)
        points.append((x, y, z))
    return series


def monitor_safety(records: Sequence[TraceRecord], d_s: float) -> SafetyResult:
    """Pairwise distance at every pose sample; PASS iff the global minimum
    stays at or above d_s."""
    by_time: dict[float, dict[int, Pos]] = {}
    for rec in records:
        if rec.kind != KIND_POSE:
            continue
        x, y, z, _yaw = parse_pose(rec.payload)
        by_time.setdefault(rec.time, {})[rec.pid] = (x, y, z)
    times: list[float] = []
    mins: list[float] = []
    global_min = math.inf
    first_violation = None
    for t in sorted(by_time):
        poses = by_time[t]
        if len(poses) < 2:
            continue
        best = math.inf
        worst_pair = None
        for a, b in itertools.combinations(sorted(poses), 2):
            d = math.dist(poses[a], poses[b])
            if d < best:
                best = d
                worst_pair = (a, b)
        times.append(t)
        mins.append(best)
        if best < global_min:
            global_min = best
        if best < d_s and first_violation is None:
            first_violation = (t, worst_pair[0], worst_pair[1])
    return SafetyResult(
        verdict=first_violation is None,
        times=times,
        min_distances=mins,
        global_min=global_min,
        first_violation=first_violation,
    )


def _dwell_intervals(
    times: list[float], points: list[Pos], center: Pos, eps_v: float, delta_v: float
) -> list[tuple[float, float]]:
    """Maximal intervals of consecutive samples inside the eps_v-ball whose
    span is at least delta_v."""
    out = []
    start = None
    last = None
    for t, p in zip(times, points):
        if math.dist(p, center) <= eps_v:
            if start is None:
                start = t
            last = t
        else:
            if start is not None and last - start >= delta_v - 1e-9:
                out.append((start, last))
            start = None
    if start is not None and last - start >= delta_v - 1e-9:
        out.append((start, last))
    return out


def task_claims(records: Sequence[TraceRecord]) -> dict[int, list[int]]:
    """task index -> pids whose granted events recorded claiming it."""
    claims: dict[int, list[int]] = {}
    for rec in records:
        if rec.kind != KIND_EVENT:
            continue
        fields = rec.fields()
        if fields.get("granted") != "1" or "task" not in fields:
            continue
        if fields.get("name") != "Assign":
            continue
        task = int(fields["task"])
        pids = claims.setdefault(task, [])
        if rec.pid not in pids:
            pids.append(rec.pid)
    return claims


def monitor_visits(
    records: Sequence[TraceRecord],
    tasks: Sequence[Pos],
    eps_v: float,
    delta_v: float,
) -> VisitResult:
    """PASS iff every task is claimed by exactly one robot (per the trace's
    assignment events) and that robot dwelt within eps_v of the task point for
    at least delta_v continuous seconds.  Incidental dwells by other robots
    are logged but do not fail the check."""
    series = _pose_series(records)
    claims = task_claims(records)
    visits: list[Visit] = []
    problems: list[str] = []
    for i, task in enumerate(tasks):
        for pid, (times, points) in sorted(series.items()):
            for t0, t1 in _dwell_intervals(times, points, task, eps_v, delta_v):
                visits.append(Visit(task=i, pid=pid, t_start=t0, t_end=t1))
    for i, _task in enumerate(tasks):
        claimants = claims.get(i, [])
        if not claimants:
            problems.append(f"task {i}: never assigned")
        elif len(claimants) > 1:
            problems.append(f"task {i}: assigned by multiple robots {sorted(claimants)}")
        else:
            pid = claimants[0]
            if not any(v.task == i and v.pid == pid for v in visits):
                problems.append(f"task {i}: assignee {pid} never dwelt at the task point")
    extra = set(claims) - set(range(len(tasks)))
    if extra:
        problems.append(f"assignments reference unknown tasks {sorted(extra)}")
    return VisitResult(verdict=not problems, visits=visits, claims=claims, problems=problems)
