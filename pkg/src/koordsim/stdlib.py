"""Builtin function library available to coordination programs.

Each builtin has a static signature (used by the checker) and an
implementation (bound at lowering time).  Implementations receive the agent's
builtin context, the evaluated argument values, and the argument variable
names (for builtins that write back to a shared variable).

Effect classes:
  * pure         — reads the snapshot / ports only (may cache planning results)
  * shared_write — buffers shared writes; callable only inside atomic events
  * actuator     — forwards a command to the motion module
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional

from koordsim import planner
from koordsim.values import TaskItem


@dataclass(frozen=True)
class BuiltinSig:
    name: str
    params: tuple[str, ...]
    result: str
    effect: str  # "pure" | "shared_write" | "actuator"
    # indices of params that must be bare shared-list variable names
    var_params: tuple[int, ...] = ()


SIGNATURES: dict[str, BuiltinSig] = {
    s.name: s
    for s in (
        BuiltinSig("assign", ("poslist", "int", "int"), "void", "shared_write", (0,)),
        BuiltinSig("complete", ("poslist", "int"), "void", "shared_write", (0,)),
        BuiltinSig("allAssigned", ("poslist",), "bool", "pure"),
        BuiltinSig("findPath", ("poslist",), "int", "pure"),
        BuiltinSig("pathIsClear", ("poslist",), "bool", "pure"),
        BuiltinSig("plannedIndex", (), "int", "pure"),
        BuiltinSig("plannedPath", (), "poslist", "pure"),
        BuiltinSig("herePath", (), "poslist", "pure"),
        BuiltinSig("shapePoint", ("int", "int"), "pos", "pure"),
    )
}


class BuiltinError(Exception):
    """Raised when a builtin is called outside its supported context."""


# ------------------------------------------------------------ implementations


def _require_planner(ctx) -> None:
    if getattr(ctx, "planner_env", None) is None:
        raise BuiltinError("planner builtins need a planner-enabled runtime")


def bi_all_assigned(ctx, args, names) -> bool:
    tasks = args[0]
    return all(t.assigned != -1 for t in tasks)


def _eligible(kind: str, item: TaskItem) -> bool:
    if item.assigned != -1:
        return False
    return kind != "CAR" or item.point[2] == 0.0


def _candidate_order(ctx, tasks) -> list[int]:
    """Unassigned task indices, nearest first; quads prefer airborne tasks."""
    env = ctx.planner_env
    psn = ctx.read_port("psn")
    cands = [i for i, t in enumerate(tasks) if _eligible(env.kind, t)]

    def key(i: int):
        p = tasks[i].point
        d = math.dist(psn, p)
        air_rank = 0
        if env.kind == "QUAD":
            air_rank = 0 if p[2] > 0 else 1
        return (air_rank, d, i)

    return sorted(cands, key=key)


def bi_find_path(ctx, args, names) -> int:
    """Scan unassigned tasks and plan a conflict-free route to the first
    feasible one.  Caches (index, path) for plannedIndex/plannedPath; -1 if
    every candidate is blocked this round."""
    _require_planner(ctx)
    tasks = args[0]
    env = ctx.planner_env
    psn = ctx.read_port("psn")
    reservations = ctx.reservations()
    for attempt, i in enumerate(_candidate_order(ctx, tasks)):
        goal = tasks[i].point
        path = planner.find_path(
            ctx.pid,
            psn,
            goal,
            env.workspace,
            reservations,
            positions=(),
            seed=env.plan_seed(ctx.pid, attempt),
            kind=env.kind,
            smooth_path=env.smooth,
            clearance=env.clearance_for,
            replans=3,
        )
        if path is not None:
            ctx.scratch["planned"] = (i, tuple(TaskItem(p) for p in path))
            return i
    ctx.scratch["planned"] = (-1, ())
    return -1


def bi_path_is_clear(ctx, args, names) -> bool:
    _require_planner(ctx)
    env = ctx.planner_env
    path = [t.point for t in args[0]]
    if not path:
        return True
    for res in ctx.reservations():
        if not res.active:
            continue
        if planner.path_min_distance(path, res.path) < env.clearance_for(res):
            return False
    return True


def bi_planned_index(ctx, args, names) -> int:
    return ctx.scratch.get("planned", (-1, ()))[0]


def bi_planned_path(ctx, args, names):
    return ctx.scratch.get("planned", (-1, ()))[1]


def bi_here_path(ctx, args, names):
    return (TaskItem(ctx.read_port("psn")),)


def bi_assign(ctx, args, names) -> None:
    tasks, index, pid = args
    index %= max(len(tasks), 1)
    item = tasks[index]
    ctx.write_list_entry(names[0], index, replace(item, assigned=pid))
    ctx.note(f"task={index}")


def bi_complete(ctx, args, names) -> None:
    tasks, index = args
    index %= max(len(tasks), 1)
    item = tasks[index]
    ctx.write_list_entry(names[0], index, replace(item, done=True))
    ctx.note(f"task={index}")


# shapePoint geometry: evenly spaced points on the perimeter of a square,
# side 4 m centered at the origin, at 1.5 m altitude.
_SHAPE_SIDE = 4.0
_SHAPE_Z = 1.5


def bi_shape_point(ctx, args, names):
    k, n = args
    n = max(n, 1)
    k %= n
    half = _SHAPE_SIDE / 2.0
    perimeter = 4.0 * _SHAPE_SIDE
    s = (k / n) * perimeter
    if s < _SHAPE_SIDE:
        x, y = -half + s, -half
    elif s < 2 * _SHAPE_SIDE:
        x, y = half, -half + (s - _SHAPE_SIDE)
    elif s < 3 * _SHAPE_SIDE:
        x, y = half - (s - 2 * _SHAPE_SIDE), half
    else:
        x, y = -half, half - (s - 3 * _SHAPE_SIDE)
    return (x, y, _SHAPE_Z)


IMPLS: dict[str, Callable[..., Any]] = {
    "assign": bi_assign,
    "complete": bi_complete,
    "allAssigned": bi_all_assigned,
    "findPath": bi_find_path,
    "pathIsClear": bi_path_is_clear,
    "plannedIndex": bi_planned_index,
    "plannedPath": bi_planned_path,
    "herePath": bi_here_path,
    "shapePoint": bi_shape_point,
}
