"""Simulation configuration: indentation-nested ``key: value`` text files.

Shape::

    num_robots: 3
    delta: 0.1
    app: task
    workspace:
      x: -4 4
      y: -3.5 3.5
      z: 0 3
    robot:
      pid: 0
      on_device: hotdec_car
      start: -3 -3 0 0
    device:
      bot_name: hotdec_car
      bot_type: CAR
      planner: RRT_CAR

Repeated ``robot:`` / ``device:`` / ``obstacle:`` blocks accumulate into
lists.  ``tasks:`` takes ``- x y z`` items.  ``#`` starts a comment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from koordsim.motion import CAR, QUAD, VehicleModel
from koordsim.planner import Box, Workspace
from koordsim.transport import NetConfig
from koordsim.values import Pos


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending key path."""


# ------------------------------------------------------------- text parsing

_REPEATED = {"robot", "device", "obstacle"}


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "on", "yes"):
        return True
    if low in ("false", "off", "no"):
        return False
    parts = text.split()
    if len(parts) > 1:
        return tuple(_parse_scalar(p) for p in parts)
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_nested(text: str) -> dict[str, Any]:
    """Parse the indentation-nested key/value syntax into dicts and lists."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        indent = len(stripped) - len(stripped.lstrip())
        lines.append((lineno, indent, stripped.strip()))

    def parse_block(start: int, indent: int) -> tuple[Any, int]:
        result: dict[str, Any] = {}
        items: list[Any] = []
        i = start
        while i < len(lines):
            lineno, ind, content = lines[i]
            if ind < indent:
                break
            if ind > indent:
                raise ConfigError(f"line {lineno}: unexpected indentation")
            if content.startswith("- "):
                items.append(_parse_scalar(content[2:].strip()))
                i += 1
                continue
            if ":" not in content:
                raise ConfigError(f"line {lineno}: expected 'key: value', got {content!r}")
            key, _, rest = content.partition(":")
            key = key.strip()
            rest = rest.strip()
            if rest:
                value = _parse_scalar(rest)
                i += 1
            else:
                if i + 1 < len(lines) and lines[i + 1][1] > ind:
                    value, i = parse_block(i + 1, lines[i + 1][1])
                else:
                    value = {}
                    i += 1
            if key in _REPEATED:
                result.setdefault(key, []).append(value)
            elif key in result:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            else:
                result[key] = value
        if items and result:
            raise ConfigError(f"line {lines[start][0]}: cannot mix list items and keys")
        return (items if items else result), i

    value, end = parse_block(0, lines[0][1] if lines else 0)
    if end != len(lines):
        raise ConfigError(f"line {lines[end][0]}: indentation below the top level")
    return value


# ---------------------------------------------------------------- structure


@dataclass
class DeviceSpec:
    name: str
    bot_type: str = QUAD
    planner: str = "RRT_QUAD"
    port: Optional[int] = None
    v_max: float = 1.0
    wheelbase: float = 0.3
    steer_max: float = 0.6
    reach_tolerance: float = 0.1

    def model(self) -> VehicleModel:
        return VehicleModel(
            kind=self.bot_type,
            wheelbase=self.wheelbase,
            v_max=self.v_max,
            steer_max=self.steer_max,
            reach_tolerance=self.reach_tolerance,
        )

    def smooth(self) -> bool:
        return "SMOOTH" in self.planner


@dataclass
class RobotSpec:
    pid: int
    on_device: str
    start: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)  # x y z yaw


@dataclass
class SimConfig:
    num_robots: int
    robots: list[RobotSpec]
    devices: dict[str, DeviceSpec]
    program_source: str
    app: str
    delta: float = 0.1
    dt: float = 0.01
    duration: float = 60.0
    seed: int = 0
    net: NetConfig = field(default_factory=NetConfig)
    workspace: Workspace = field(default_factory=lambda: default_workspace())
    tasks: list[Pos] = field(default_factory=list)
    eps_v: float = 0.2
    delta_v: float = 1.0
    d_s: float = 0.5
    safety_monitor: bool = True
    halt_on_violation: bool = True
    source_path: Optional[str] = None

    def resolved_items(self) -> list[tuple[str, str]]:
        """Flat key/value view echoed into trace headers."""
        items = [
            ("app", self.app),
            ("num_robots", str(self.num_robots)),
            ("delta", repr(self.delta)),
            ("dt", repr(self.dt)),
            ("duration", repr(self.duration)),
            ("seed", str(self.seed)),
            ("d_s", repr(self.d_s)),
            ("eps_v", repr(self.eps_v)),
            ("delta_v", repr(self.delta_v)),
            ("net.mode", self.net.mode),
            ("net.loss_prob", repr(self.net.loss_prob)),
            ("net.delay", repr(self.net.delay)),
            ("safety_monitor", str(self.safety_monitor).lower()),
            ("halt_on_violation", str(self.halt_on_violation).lower()),
            ("workspace.lo", " ".join(repr(c) for c in self.workspace.bounds.lo)),
            ("workspace.hi", " ".join(repr(c) for c in self.workspace.bounds.hi)),
        ]
        for i, ob in enumerate(self.workspace.obstacles):
            items.append((f"obstacle.{i}.lo", " ".join(repr(c) for c in ob.lo)))
            items.append((f"obstacle.{i}.hi", " ".join(repr(c) for c in ob.hi)))
        for i, t in enumerate(self.tasks):
            items.append((f"task.{i}", " ".join(repr(c) for c in t)))
        for r in self.robots:
            items.append(
                (f"robot.{r.pid}", f"{r.on_device} start=" + " ".join(repr(c) for c in r.start))
            )
        for name in sorted(self.devices):
            d = self.devices[name]
            items.append(
                (
                    f"device.{name}",
                    f"type={d.bot_type} planner={d.planner} v_max={d.v_max!r} port={d.port}",
                )
            )
        return items


def default_workspace(d_s: float = 0.5) -> Workspace:
    # 8 m x 7 m footprint, 3 m ceiling, centered on the origin
    return Workspace(bounds=Box((-4.0, -3.5, 0.0), (4.0, 3.5, 3.0)), d_s=d_s)


# ------------------------------------------------------------------ loading


def _need(data: dict, key: str, where: str):
    if key not in data:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return data[key]


def _as_floats(value, n: int, where: str) -> tuple:
    if isinstance(value, (int, float)):
        value = (value,)
    if not isinstance(value, tuple) or len(value) != n:
        raise ConfigError(f"{where}: expected {n} numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {n} numbers") from None


def app_source(name: str) -> str:
    """Source text of a shipped program by app name."""
    ref = resources.files("koordsim.apps.programs").joinpath(f"{name}.koord")
    try:
        return ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"app: unknown application {name!r}") from None


def shipped_config_path(name: str) -> Path:
    ref = resources.files("koordsim.apps.configs").joinpath(f"{name}.cfg")
    with resources.as_file(ref) as p:
        return Path(p)


def load_config(path) -> SimConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = loads_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
    cfg.source_path = str(path)
    return cfg


def loads_config(text: str, base_dir: Optional[Path] = None) -> SimConfig:
    data = parse_nested(text)
    if not isinstance(data, dict):
        raise ConfigError("top level must be key: value entries")

    num_robots = _need(data, "num_robots", "top level")
    if not isinstance(num_robots, int) or num_robots < 1:
        raise ConfigError("num_robots: must be a positive integer")

    delta = float(data.get("delta", 0.1))
    dt = float(data.get("dt", 0.01))
    if delta <= 0 or dt <= 0:
        raise ConfigError("delta/dt: must be positive")
    ratio = delta / dt
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError("delta: must be an integer multiple of dt")

    # program: either a shipped app name or a source file next to the config
    if "program" in data:
        src_path = Path(data["program"])
        if base_dir is not None and not src_path.is_absolute():
            src_path = base_dir / src_path
        if not src_path.exists():
            raise ConfigError(f"program: file not found: {src_path}")
        program_source = src_path.read_text(encoding="utf-8")
        app = src_path.stem
    else:
        app = data.get("app", "task")
        program_source = app_source(app)

    # devices
    devices: dict[str, DeviceSpec] = {}
    for i, block in enumerate(data.get("device", [])):
        where = f"device[{i}]"
        if not isinstance(block, dict):
            raise ConfigError(f"{where}: expected nested keys")
        name = _need(block, "bot_name", where)
        bot_type = str(block.get("bot_type", QUAD)).upper()
        if bot_type not in (CAR, QUAD):
            raise ConfigError(f"{where}.bot_type: must be CAR or QUAD")
        planner = str(block.get("planner", f"RRT_{bot_type}")).upper()
        if planner not in ("RRT_CAR", "RRT_QUAD", "RRT_SMOOTH_CAR", "RRT_SMOOTH_QUAD"):
            raise ConfigError(f"{where}.planner: unknown planner {planner!r}")
        if not planner.endswith(bot_type):
            raise ConfigError(f"{where}.planner: {planner} does not match bot_type {bot_type}")
        if name in devices:
            raise ConfigError(f"{where}.bot_name: duplicate device {name!r}")
        devices[name] = DeviceSpec(
            name=name,
            bot_type=bot_type,
            planner=planner,
            port=block.get("port"),
            v_max=float(block.get("v_max", 1.0)),
            wheelbase=float(block.get("wheelbase", 0.3)),
            steer_max=float(block.get("steer_max", 0.6)),
            reach_tolerance=float(block.get("reach_tolerance", 0.1)),
        )
    if not devices:
        devices["default_quad"] = DeviceSpec(name="default_quad")

    # robots
    robots: list[RobotSpec] = []
    seen_pids: set[int] = set()
    blocks = data.get("robot", [])
    if not blocks:
        # default fleet: every pid on the sole device in a spread line
        if len(devices) != 1:
            raise ConfigError("robot: required when more than one device is declared")
        only = next(iter(devices))
        blocks = [{"pid": pid, "on_device": only} for pid in range(num_robots)]
    for i, block in enumerate(blocks):
        where = f"robot[{i}]"
        if not isinstance(block, dict):
            raise ConfigError(f"{where}: expected nested keys")
        pid = _need(block, "pid", where)
        if not isinstance(pid, int):
            raise ConfigError(f"{where}.pid: must be an integer")
        if pid in seen_pids:
            raise ConfigError(f"{where}.pid: duplicate pid {pid}")
        seen_pids.add(pid)
        dev = _need(block, "on_device", where)
        if dev not in devices:
            raise ConfigError(f"{where}.on_device: unknown device {dev!r}")
        if "start" in block:
            start = _as_floats(block["start"], 4, f"{where}.start")
        else:
            start = (-3.0 + 1.5 * pid, -3.0, 0.0, 0.0)
        if devices[dev].bot_type == CAR and start[2] != 0.0:
            raise ConfigError(f"{where}.start: ground vehicle must start at z=0")
        robots.append(RobotSpec(pid=pid, on_device=dev, start=start))
    if seen_pids != set(range(num_robots)):
        raise ConfigError(
            f"robot: pids must be exactly 0..{num_robots - 1}, got {sorted(seen_pids)}"
        )
    robots.sort(key=lambda r: r.pid)

    d_s = float(data.get("d_s", 0.5))
    workspace = _load_workspace(data.get("workspace", {}), data.get("obstacle", []), d_s)

    tasks: list[Pos] = []
    for i, item in enumerate(data.get("tasks", [])):
        p = _as_floats(item, 3, f"tasks[{i}]")
        if not workspace.point_free(p):
            raise ConfigError(f"tasks[{i}]: point {p} outside workspace or inside obstacle")
        tasks.append(p)

    net_data = data.get("net", {})
    if not isinstance(net_data, dict):
        raise ConfigError("net: expected nested keys")
    delay = net_data.get("delay", 0.0)
    if isinstance(delay, tuple):
        delay = tuple(float(d) for d in delay)
    else:
        delay = float(delay)
    ports = {}
    for r in robots:
        port = devices[r.on_device].port
        if port is not None:
            ports[r.pid] = port + r.pid
    net = NetConfig(
        mode=str(net_data.get("mode", "in_process")),
        loss_prob=float(net_data.get("loss_prob", 0.0)),
        delay=delay,
        seed=int(net_data.get("seed", data.get("seed", 0))),
        ports=ports,
    )
    try:
        net.validate()
    except ValueError as exc:
        raise ConfigError(f"net: {exc}") from None
    if net.mode == "udp" and len(net.ports) != num_robots:
        raise ConfigError("net: udp mode needs a port on every robot's device")

    return SimConfig(
        num_robots=num_robots,
        robots=robots,
        devices=devices,
        program_source=program_source,
        app=app,
        delta=delta,
        dt=dt,
        duration=float(data.get("duration", 60.0)),
        seed=int(data.get("seed", 0)),
        net=net,
        workspace=workspace,
        tasks=tasks,
        eps_v=float(data.get("eps_v", 0.2)),
        delta_v=float(data.get("delta_v", 1.0)),
        d_s=d_s,
        safety_monitor=bool(data.get("safety_monitor", True)),
        halt_on_violation=bool(data.get("halt_on_violation", True)),
    )


def _load_workspace(block, obstacle_blocks, d_s: float) -> Workspace:
    ws = default_workspace(d_s)
    lo = list(ws.bounds.lo)
    hi = list(ws.bounds.hi)
    if not isinstance(block, dict):
        raise ConfigError("workspace: expected nested keys")
    for axis, idx in (("x", 0), ("y", 1), ("z", 2)):
        if axis in block:
            lo[idx], hi[idx] = _as_floats(block[axis], 2, f"workspace.{axis}")
            if lo[idx] >= hi[idx]:
                raise ConfigError(f"workspace.{axis}: empty range")
    bounds = Box(tuple(lo), tuple(hi))
    obstacles = []
    for i, ob in enumerate(obstacle_blocks):
        where = f"obstacle[{i}]"
        if not isinstance(ob, dict):
            raise ConfigError(f"{where}: expected nested keys")
        b = Box(
            _as_floats(_need(ob, "lo", where), 3, f"{where}.lo"),
            _as_floats(_need(ob, "hi", where), 3, f"{where}.hi"),
        )
        if not (bounds.contains(b.lo) and bounds.contains(b.hi)):
            raise ConfigError(f"{where}: obstacle extends outside workspace bounds")
        obstacles.append(b)
    return Workspace(bounds=bounds, obstacles=obstacles, d_s=d_s)
