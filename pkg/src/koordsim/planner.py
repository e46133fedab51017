"""RRT path planning, shortcut smoothing, and route-conflict predicates.

Conflict checking is static-tube: a route inflated by a safety radius must
stay clear of every other active route's tube and of other robots' current
positions.  This is conservative (space-only, not space-time) but sound for
round-by-round clear/blocked decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from koordsim.values import Pos

DEFAULT_STEP = 0.25  # m, RRT extension step
DEFAULT_GOAL_BIAS = 0.1
DEFAULT_MAX_ITERS = 5000
DEFAULT_REPLANS = 3


class PlanningError(ValueError):
    """Violated planning precondition (endpoint out of bounds / inside obstacle)."""


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate box {self.lo}..{self.hi}")

    def contains(self, p: Sequence[float]) -> bool:
        return all(l <= c <= h for l, c, h in zip(self.lo, p, self.hi))


@dataclass
class Workspace:
    bounds: Box
    obstacles: list[Box] = field(default_factory=list)
    d_s: float = 0.5

    def __post_init__(self):
        if self.d_s <= 0:
            raise ValueError("safety distance must be positive")

    def point_free(self, p: Sequence[float]) -> bool:
        if not self.bounds.contains(p):
            return False
        return not any(ob.contains(p) for ob in self.obstacles)


@dataclass
class RouteReservation:
    pid: int
    path: list[Pos]
    active: bool = True


@dataclass
class Path:
    waypoints: list[Pos]
    kind: str = "QUAD"

    def length(self) -> float:
        return path_length(self.waypoints)


def path_length(waypoints: Sequence[Pos]) -> float:
    return sum(math.dist(a, b) for a, b in zip(waypoints, waypoints[1:]))


# --------------------------------------------------------- collision checking


def _segment_hits_box(a: Pos, b: Pos, box: Box) -> bool:
    """Exact segment/axis-aligned-box intersection test (slab method)."""
    t0, t1 = 0.0, 1.0
    for k in range(3):
        d = b[k] - a[k]
        if abs(d) < 1e-15:
            if a[k] < box.lo[k] or a[k] > box.hi[k]:
                return False
        else:
            ta = (box.lo[k] - a[k]) / d
            tb = (box.hi[k] - a[k]) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return False
    return True


def segment_clear(a: Pos, b: Pos, workspace: Workspace) -> bool:
    """True iff the segment stays in bounds and outside all obstacles.
    Bounds are convex, so checking the endpoints suffices; obstacle hits
    use an exact segment/box intersection."""
    if not (workspace.bounds.contains(a) and workspace.bounds.contains(b)):
        return False
    return not any(_segment_hits_box(a, b, ob) for ob in workspace.obstacles)


def path_clear(waypoints: Sequence[Pos], workspace: Workspace) -> bool:
    return all(segment_clear(a, b, workspace) for a, b in zip(waypoints, waypoints[1:]))


# ------------------------------------------------------------------ distances


def seg_seg_distance(p1: Pos, p2: Pos, q1: Pos, q2: Pos) -> float:
    """Minimum distance between segments p1p2 and q1q2 in 3D."""
    p1a = np.asarray(p1, dtype=float)
    d1 = np.asarray(p2, dtype=float) - p1a
    q1a = np.asarray(q1, dtype=float)
    d2 = np.asarray(q2, dtype=float) - q1a
    r = p1a - q1a
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    eps = 1e-12
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s, t = 0.0, min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= eps:
            t, s = 0.0, min(max(-c / a, 0.0), 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    closest_p = p1a + d1 * s
    closest_q = q1a + d2 * t
    return float(np.linalg.norm(closest_p - closest_q))


def _as_segments(waypoints: Sequence[Pos]) -> list[tuple[Pos, Pos]]:
    if len(waypoints) == 1:
        return [(waypoints[0], waypoints[0])]
    return list(zip(waypoints, waypoints[1:]))


def path_min_distance(a: Sequence[Pos], b: Sequence[Pos]) -> float:
    """Minimum distance between two polylines (single points allowed)."""
    if not a or not b:
        return math.inf
    best = math.inf
    for s1, s2 in _as_segments(list(a)):
        for t1, t2 in _as_segments(list(b)):
            d = seg_seg_distance(s1, s2, t1, t2)
            if d < best:
                best = d
    return best


def point_path_distance(p: Pos, path: Sequence[Pos]) -> float:
    return path_min_distance([p], path)


# ------------------------------------------------------------------- planning


def _check_endpoint(name: str, p: Pos, workspace: Workspace, kind: str) -> None:
    if kind == "CAR" and p[2] != 0.0:
        raise PlanningError(f"{name} must lie in the ground plane for CAR")
    if not workspace.point_free(p):
        raise PlanningError(f"{name} {p} is out of bounds or inside an obstacle")


def rrt_plan(
    start: Pos,
    goal: Pos,
    workspace: Workspace,
    kind: str = "QUAD",
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    step: float = DEFAULT_STEP,
    goal_bias: float = DEFAULT_GOAL_BIAS,
) -> Optional[list[Pos]]:
    """Plan a collision-free path with a rapidly-exploring random tree.

    Deterministic given the seed.  Returns None after max_iters samples
    without reaching the goal; raises PlanningError for invalid endpoints.
    Car paths are planned in the z=0 plane.
    """
    start = tuple(float(c) for c in start)
    goal = tuple(float(c) for c in goal)
    _check_endpoint("start", start, workspace, kind)
    _check_endpoint("goal", goal, workspace, kind)
    if math.dist(start, goal) <= 1e-9:
        return [start]
    if segment_clear(start, goal, workspace):
        return [start, goal]

    rng = np.random.default_rng(seed)
    lo = np.asarray(workspace.bounds.lo, dtype=float)
    hi = np.asarray(workspace.bounds.hi, dtype=float)
    planar = kind == "CAR"
    nodes = np.empty((max_iters + 1, 3))
    nodes[0] = start
    parents = [0]
    count = 1
    goal_arr = np.asarray(goal)
    for _ in range(max_iters):
        if rng.random() < goal_bias:
            sample = goal_arr
        else:
            sample = lo + rng.random(3) * (hi - lo)
            if planar:
                sample = sample.copy()
                sample[2] = 0.0
        diffs = nodes[:count] - sample
        nearest = int(np.argmin(np.einsum("ij,ij->i", diffs, diffs)))
        base = nodes[nearest]
        delta = sample - base
        dist = float(np.linalg.norm(delta))
        if dist <= 1e-9:
            continue
        new = sample if dist <= step else base + delta * (step / dist)
        if not segment_clear(tuple(base), tuple(new), workspace):
            continue
        nodes[count] = new
        parents.append(nearest)
        idx = count
        count += 1
        if float(np.linalg.norm(new - goal_arr)) <= step and segment_clear(
            tuple(new), goal, workspace
        ):
            path = [goal, tuple(new)]
            while idx != 0:
                idx = parents[idx]
                path.append(tuple(nodes[idx]))
            path.reverse()
            return _dedupe(path)
    return None


def _dedupe(waypoints: list[Pos]) -> list[Pos]:
    out = [waypoints[0]]
    for p in waypoints[1:]:
        if math.dist(p, out[-1]) > 1e-9:
            out.append(p)
    return out


def smooth(
    path: Sequence[Pos],
    workspace: Workspace,
    seed: int = 0,
    rounds: int = 100,
) -> list[Pos]:
    """Shortcut smoothing: repeatedly splice straight segments between random
    path indices when collision-free.  Never lengthens; endpoints unchanged."""
    path = [tuple(p) for p in path]
    if len(path) <= 2:
        return path
    rng = np.random.default_rng(seed)
    for _ in range(rounds):
        if len(path) <= 2:
            break
        i = int(rng.integers(0, len(path) - 2))
        j = int(rng.integers(i + 2, len(path)))
        if segment_clear(path[i], path[j], workspace):
            shortcut = math.dist(path[i], path[j])
            existing = path_length(path[i : j + 1])
            if shortcut < existing - 1e-12:
                path = path[: i + 1] + path[j:]
    return path


def path_is_clear(
    path: Sequence[Pos],
    reservations: Sequence[RouteReservation],
    positions: Sequence[Pos],
    d_s: float,
) -> bool:
    """True iff the d_s-inflated tube around `path` intersects neither any
    active reservation's d_s-inflated tube nor any position inflated by d_s."""
    threshold = 2.0 * d_s
    for res in reservations:
        if not res.active or not res.path:
            continue
        if path_min_distance(path, res.path) < threshold:
            return False
    for p in positions:
        if point_path_distance(p, path) < threshold:
            return False
    return True


def find_path(
    pid: int,
    start: Pos,
    goal: Pos,
    workspace: Workspace,
    reservations: Sequence[RouteReservation],
    positions: Sequence[Pos] = (),
    seed: int = 0,
    kind: str = "QUAD",
    smooth_path: bool = True,
    clearance: Optional[Callable[[RouteReservation], float]] = None,
    replans: int = DEFAULT_REPLANS,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> Optional[list[Pos]]:
    """Plan, smooth, and clearance-check a route to `goal`.

    `clearance` maps a reservation to the required centerline distance
    (default: 2*d_s, i.e. touching safety tubes).  Returns None ("blocked")
    when planning fails or no replan passes the clearance check.  Replans
    after the first detour through a randomly sampled via point, so a route
    blocked by a reservation (not by an obstacle) can still be re-routed.
    """
    others = [r for r in reservations if r.pid != pid and r.active and r.path]
    rng = np.random.default_rng(seed)
    lo = np.asarray(workspace.bounds.lo)
    hi = np.asarray(workspace.bounds.hi)
    for attempt in range(max(replans, 1)):
        if attempt == 0:
            path = rrt_plan(
                start, goal, workspace, kind=kind, seed=seed + attempt, max_iters=max_iters
            )
        else:
            via = None
            for _ in range(20):
                cand = lo + rng.random(3) * (hi - lo)
                if kind == "CAR":
                    cand[2] = 0.0
                if workspace.point_free(cand):
                    via = tuple(float(c) for c in cand)
                    break
            if via is None:
                continue
            first = rrt_plan(
                start, via, workspace, kind=kind, seed=seed + attempt, max_iters=max_iters
            )
            second = rrt_plan(
                via, goal, workspace, kind=kind, seed=seed + attempt, max_iters=max_iters
            )
            path = first + second[1:] if first and second else None
        if path is None:
            continue
        candidates = [path]
        if smooth_path:
            # smoothing only respects obstacles; it can shortcut a detour back
            # into a reservation, so keep the raw path as a fallback candidate
            candidates.insert(0, smooth(path, workspace, seed=seed + attempt))
        for cand in candidates:
            ok = True
            for res in others:
                required = clearance(res) if clearance else 2.0 * workspace.d_s
                if path_min_distance(cand, res.path) < required:
                    ok = False
                    break
            if ok:
                for p in positions:
                    if point_path_distance(p, cand) < 2.0 * workspace.d_s:
                        ok = False
                        break
            if ok:
                return cand
    return None
