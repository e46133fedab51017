"""Vehicle models and waypoint tracking behind the Motion port surface.

Cars follow a kinematic bicycle model steered by pure pursuit; quadcopters use
straight-line motion in 3D.  The ports exposed to programs are `psn` (pose),
`reached` (arrival flag), and the `route` actuator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from koordsim.values import Pos

CAR = "CAR"
QUAD = "QUAD"

# speed profile near route end: trapezoidal braking plus a creep floor so the
# vehicle always closes the final ε_reach gap
_BRAKE_DECEL = 1.0  # m/s^2
_ACCEL = 2.0  # m/s^2
_CREEP_SPEED = 0.05  # m/s


@dataclass
class Pose:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0

    def position(self) -> Pos:
        return (self.x, self.y, self.z)


def wrap_angle(a: float) -> float:
    """Normalize to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass
class VehicleModel:
    kind: str = QUAD
    wheelbase: float = 0.3  # cars only
    v_max: float = 1.0
    steer_max: float = 0.6  # rad, cars only
    reach_tolerance: float = 0.1  # m

    def __post_init__(self) -> None:
        if self.kind not in (CAR, QUAD):
            raise ValueError(f"unknown vehicle kind {self.kind!r}")
        if self.wheelbase <= 0 or self.v_max <= 0:
            raise ValueError("wheelbase and v_max must be positive")
        if not 0 < self.steer_max < math.pi / 2:
            raise ValueError("steer_max must be in (0, pi/2)")


def car_model(**kw) -> VehicleModel:
    return VehicleModel(kind=CAR, **kw)


def quad_model(**kw) -> VehicleModel:
    return VehicleModel(kind=QUAD, **kw)


@dataclass
class MotionState:
    pose: Pose = field(default_factory=Pose)
    speed: float = 0.0
    route: list[Pos] = field(default_factory=list)
    route_cursor: int = 0
    reached: bool = True  # empty route counts as reached


def set_route(state: MotionState, model: VehicleModel, waypoints: Sequence[Pos]) -> MotionState:
    """Replace the route; resets the cursor and the reached flag."""
    waypoints = [tuple(float(c) for c in w) for w in waypoints]
    if not waypoints:
        raise ValueError("route must be non-empty")
    if model.kind == CAR and any(w[2] != 0.0 for w in waypoints):
        raise ValueError("ground vehicles cannot follow routes above the plane")
    state.route = waypoints
    state.route_cursor = 0
    state.reached = False
    return state


def read_ports(state: MotionState) -> tuple[Pose, bool]:
    """Sensor ports (psn, reached); pure read of the current state."""
    return state.pose, state.reached


def _dist(a: Pos, b: Pos) -> float:
    return math.dist(a, b)


def _advance_cursor(state: MotionState, eps: float) -> None:
    pos = state.pose.position()
    while (
        state.route_cursor < len(state.route) - 1
        and _dist(pos, state.route[state.route_cursor]) <= eps
    ):
        state.route_cursor += 1


def _remaining_length(state: MotionState) -> float:
    pos = state.pose.position()
    total = _dist(pos, state.route[state.route_cursor])
    for i in range(state.route_cursor, len(state.route) - 1):
        total += _dist(state.route[i], state.route[i + 1])
    return total


def _lookahead_target(state: MotionState, lookahead: float) -> Pos:
    """First route point at least `lookahead` away, walking from the cursor."""
    pos = state.pose.position()
    for i in range(state.route_cursor, len(state.route)):
        if _dist(pos, state.route[i]) >= lookahead:
            return state.route[i]
    return state.route[-1]


def step(state: MotionState, model: VehicleModel, dt: float) -> MotionState:
    """Advance the vehicle by dt; per-step displacement never exceeds v_max*dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.reached or not state.route:
        state.speed = 0.0
        return state
    eps = model.reach_tolerance
    _advance_cursor(state, eps)
    final = state.route[-1]
    pos = state.pose.position()
    if state.route_cursor == len(state.route) - 1 and _dist(pos, final) <= eps:
        state.reached = True
        state.speed = 0.0
        return state

    if model.kind == QUAD:
        target = state.route[state.route_cursor]
        d = _dist(pos, target)
        travel = min(model.v_max * dt, d)
        if d > 0:
            f = travel / d
            state.pose.x += (target[0] - pos[0]) * f
            state.pose.y += (target[1] - pos[1]) * f
            state.pose.z += (target[2] - pos[2]) * f
        state.speed = travel / dt
        _advance_cursor(state, eps)
        if state.route_cursor == len(state.route) - 1 and _dist(state.pose.position(), final) <= eps:
            state.reached = True
            state.speed = 0.0
        return state

    # CAR: pure pursuit over the kinematic bicycle model
    lookahead = max(model.wheelbase, 2.0 * eps)
    target = _lookahead_target(state, lookahead)
    dx = target[0] - state.pose.x
    dy = target[1] - state.pose.y
    alpha = wrap_angle(math.atan2(dy, dx) - state.pose.yaw)
    if math.cos(alpha) < 0.0:
        # target behind the rear axle: saturate steering toward it
        steer = math.copysign(model.steer_max, alpha if alpha != 0.0 else 1.0)
    else:
        # constant-lookahead pursuit: curvature depends on bearing error only,
        # so distant targets at large bearing still get a tight (saturated) turn
        steer = math.atan2(2.0 * model.wheelbase * math.sin(alpha), lookahead)
        steer = max(-model.steer_max, min(model.steer_max, steer))
    d_rem = _remaining_length(state)
    v_target = min(model.v_max, math.sqrt(2.0 * _BRAKE_DECEL * d_rem))
    v_target = max(v_target, _CREEP_SPEED)
    speed = min(v_target, state.speed + _ACCEL * dt)
    state.pose.x += speed * math.cos(state.pose.yaw) * dt
    state.pose.y += speed * math.sin(state.pose.yaw) * dt
    state.pose.yaw = wrap_angle(
        state.pose.yaw + (speed / model.wheelbase) * math.tan(steer) * dt
    )
    state.speed = speed
    _advance_cursor(state, eps)
    if state.route_cursor == len(state.route) - 1 and _dist(state.pose.position(), final) <= eps:
        state.reached = True
        state.speed = 0.0
    return state
