"""Runtime value representations for program variables.

Scalars are plain Python int/float/bool.  A `pos` is a 3-tuple of floats.
A `poslist` is a tuple of TaskItem entries; the assignment metadata is only
meaningful for task lists, route reservations simply leave it at defaults.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

Pos = Tuple[float, float, float]


@dataclass(frozen=True)
class TaskItem:
    point: Pos
    assigned: int = -1
    done: bool = False


def default_value(base_type: str):
    return {
        "int": 0,
        "float": 0.0,
        "bool": False,
        "pos": (0.0, 0.0, 0.0),
        "poslist": (),
    }[base_type]


def as_pos(v) -> Pos:
    x, y, z = v
    return (float(x), float(y), float(z))


def points_of(poslist) -> list[Pos]:
    return [item.point for item in poslist]


def poslist_from_points(points) -> tuple[TaskItem, ...]:
    return tuple(TaskItem(as_pos(p)) for p in points)


def format_value(v) -> str:
    """Canonical text form used in traces; deterministic across runs."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, tuple) and len(v) == 3 and all(isinstance(c, float) for c in v):
        return "(" + ",".join(repr(c) for c in v) + ")"
    if isinstance(v, TaskItem):
        return f"{format_value(v.point)}:{v.assigned}:{int(v.done)}"
    if isinstance(v, tuple):
        return "[" + ";".join(format_value(item) for item in v) + "]"
    raise TypeError(f"unsupported value {v!r}")
