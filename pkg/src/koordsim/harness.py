"""Lock-step simulation harness.

Owns the simulated clock: vehicles advance every dt, agents run one
synchronized round every delta, monitors sample every dt.  All cross-agent
communication flows through the transport; with the in-process transport a
(config, seed) pair reproduces a byte-identical trace.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from koordsim import motion, trace
from koordsim.config import DeviceSpec, RobotSpec, SimConfig, SimConfig as _SimConfig
from koordsim.monitors import SafetyResult, VisitResult, monitor_safety, monitor_visits
from koordsim.runtime import AgentRuntime, PlannerEnv, RoundClock, compile_program
from koordsim.transport import make_transport
from koordsim.values import TaskItem

# conservative bound on cross-track deviation while following a route; a car
# reversing direction arcs at radius wheelbase/tan(steer_max) ~ 0.44 m, so its
# worst-case lateral deviation from the route chord approaches two radii
TRACKING_MARGIN = {motion.CAR: 0.9, motion.QUAD: 0.1}

# UDP mode cannot rely on the simulated clock for delivery; give the loopback
# datagrams a moment to land between phases
_UDP_SETTLE = 0.004  # s


@dataclass
class Metrics:
    rounds: int = 0
    sim_time: float = 0.0
    wall_time: float = 0.0
    rt_factor: float = 0.0
    packets_per_s: dict[int, float] = field(default_factory=dict)
    bytes_per_s: dict[int, float] = field(default_factory=dict)
    total_packets: int = 0
    total_bytes: int = 0
    tasks_completed: int = 0
    completion_time: Optional[float] = None  # sim time when every task was done
    blocked_rounds: int = 0
    faults: dict[int, str] = field(default_factory=dict)

    def items(self) -> list[tuple[str, str]]:
        out = [
            ("rounds", str(self.rounds)),
            ("sim_time", f"{self.sim_time:.6g}"),
            ("wall_time", f"{self.wall_time:.6g}"),
            ("rt_factor", f"{self.rt_factor:.6g}"),
            ("total_packets", str(self.total_packets)),
            ("total_bytes", str(self.total_bytes)),
            ("tasks_completed", str(self.tasks_completed)),
            ("completion_time", "" if self.completion_time is None else f"{self.completion_time:.6g}"),
            ("blocked_rounds", str(self.blocked_rounds)),
        ]
        for pid in sorted(self.packets_per_s):
            out.append((f"packets_per_s.{pid}", f"{self.packets_per_s[pid]:.6g}"))
            out.append((f"bytes_per_s.{pid}", f"{self.bytes_per_s[pid]:.6g}"))
        for pid, msg in sorted(self.faults.items()):
            out.append((f"fault.{pid}", msg))
        return out


@dataclass
class RunResult:
    config: SimConfig
    metrics: Metrics
    records: list[trace.TraceRecord]
    header: list[tuple[str, str]]
    safety: Optional[SafetyResult]
    visits: Optional[VisitResult]
    trace_path: Optional[str] = None

    @property
    def verdict(self) -> bool:
        if self.metrics.faults:
            return False
        if self.safety is not None and not self.safety.verdict:
            return False
        if self.visits is not None and not self.visits.verdict:
            return False
        return True


def run(config: SimConfig, trace_path: Optional[str] = None) -> RunResult:
    """Execute a full simulation and evaluate the monitors on its trace."""
    table = compile_program(config.program_source, config.num_robots)

    pids = [r.pid for r in config.robots]
    transport = make_transport(pids, config.net)
    clock = RoundClock(delta=config.delta)
    udp = config.net.mode == "udp"

    models: dict[int, motion.VehicleModel] = {}
    states: dict[int, motion.MotionState] = {}
    margins: dict[int, float] = {}
    for spec in config.robots:
        dev = config.devices[spec.on_device]
        models[spec.pid] = dev.model()
        x, y, z, yaw = spec.start
        states[spec.pid] = motion.MotionState(pose=motion.Pose(x, y, z, yaw))
        margins[spec.pid] = TRACKING_MARGIN[dev.bot_type]

    shared_init = {}
    if any(d.name == "tasks" for d in table.checked.shared_vars):
        shared_init["tasks"] = tuple(TaskItem(p) for p in config.tasks)

    agents: list[AgentRuntime] = []
    for spec in config.robots:
        dev = config.devices[spec.on_device]
        st = states[spec.pid]
        mdl = models[spec.pid]
        env = PlannerEnv(
            workspace=config.workspace,
            kind=dev.bot_type,
            smooth=dev.smooth(),
            d_s=config.d_s,
            my_margin=margins[spec.pid],
            margins=margins,
            seed_base=config.seed,
        )
        agents.append(
            AgentRuntime(
                pid=spec.pid,
                table=table,
                transport=transport,
                clock=clock,
                motion_read=(lambda s=st: motion.read_ports(s)),
                motion_actuate=(lambda wps, s=st, m=mdl: motion.set_route(s, m, wps)),
                planner_env=env,
                init=shared_init,
            )
        )

    steps_per_round = round(config.delta / config.dt)
    total_steps = round(config.duration / config.dt)
    header = config.resolved_items()
    records: list[trace.TraceRecord] = []
    metrics = Metrics()
    stats = transport.stats

    idle_rounds = 0
    halted = False
    wall0 = time.perf_counter()
    step = 0
    t = 0.0
    while step < total_steps:
        t = step * config.dt
        batch: list[trace.TraceRecord] = []

        if step % steps_per_round == 0:
            round_idx = step // steps_per_round
            if udp:
                time.sleep(_UDP_SETTLE)
            transport.current_round = round_idx
            for a in agents:
                a.begin_round(t)
            for a in agents:
                a.select_event()
            for a in agents:
                a.send_intent(t)
            if udp:
                time.sleep(_UDP_SETTLE)
            for a in agents:
                a.arbitrate(t)
            for a in agents:
                a.execute()
            all_idle = True
            for a in agents:
                sent = a.commit_round(t)
                recv = stats.per_round.get(a.pid, {}).get(round_idx, 0)
                if a.selected is not None:
                    all_idle = False
                    parts = [
                        f"name={a.selected.name}",
                        f"atomic={int(a.selected.atomic)}",
                        f"granted={int(a.granted)}",
                    ]
                    parts.extend(a.pending_notes)
                    batch.append(trace.TraceRecord(t, a.pid, trace.KIND_EVENT, " ".join(parts)))
                    if a.selected.atomic and a.granted:
                        batch.append(
                            trace.TraceRecord(
                                t,
                                a.pid,
                                trace.KIND_GRANT,
                                f"scope={a.selected.index} intents={a.intent_count()}",
                            )
                        )
                if sent or recv:
                    batch.append(
                        trace.TraceRecord(t, a.pid, trace.KIND_MSG, f"sent={sent} recv={recv}")
                    )
                if a.fault and a.pid not in metrics.faults:
                    metrics.faults[a.pid] = a.fault
                    batch.append(
                        trace.TraceRecord(t, a.pid, trace.KIND_MONITOR, f"fault pid={a.pid}")
                    )
                if a.selected is None and "tasks" in a.store.snapshot:
                    if any(item.assigned == -1 for item in a.store.snapshot["tasks"]):
                        metrics.blocked_rounds += 1
            metrics.rounds = round_idx + 1
            if all_idle and all(states[p].reached for p in pids):
                idle_rounds += 1
            else:
                idle_rounds = 0
            if metrics.completion_time is None and shared_init.get("tasks"):
                done = agents[0].store.snapshot.get("tasks", ())
                if done and all(item.done for item in done):
                    metrics.completion_time = t

        for pid in sorted(pids):
            pose = states[pid].pose
            batch.append(
                trace.TraceRecord(
                    t, pid, trace.KIND_POSE, trace.pose_payload(pose.x, pose.y, pose.z, pose.yaw)
                )
            )

        violation = None
        if config.safety_monitor and len(pids) >= 2:
            for i, a_pid in enumerate(pids):
                for b_pid in pids[i + 1 :]:
                    d = math.dist(states[a_pid].pose.position(), states[b_pid].pose.position())
                    if d < config.d_s:
                        violation = (a_pid, b_pid, d)
                        break
                if violation:
                    break
        if violation:
            a_pid, b_pid, d = violation
            batch.append(
                trace.TraceRecord(
                    t,
                    min(a_pid, b_pid),
                    trace.KIND_MONITOR,
                    f"safety_violation pids={a_pid},{b_pid} dist={d!r}",
                )
            )

        batch.sort(key=trace.TraceRecord.sort_key)
        records.extend(batch)

        if violation and config.halt_on_violation:
            halted = True
            break
        if idle_rounds >= 2:
            break

        for pid in pids:
            motion.step(states[pid], models[pid], config.dt)
        step += 1

    transport.close()
    wall = time.perf_counter() - wall0
    sim_time = t if (halted or idle_rounds >= 2 or step >= total_steps) else step * config.dt
    metrics.sim_time = sim_time
    metrics.wall_time = wall
    metrics.rt_factor = sim_time / wall if wall > 0 else float("inf")
    span = max(sim_time, config.dt)
    for pid in pids:
        metrics.packets_per_s[pid] = stats.packets_received.get(pid, 0) / span
        metrics.bytes_per_s[pid] = stats.bytes_received.get(pid, 0) / span
    metrics.total_packets = stats.total_received()
    metrics.total_bytes = stats.total_bytes_received()
    if shared_init.get("tasks") is not None and agents:
        final = agents[0].store.base.get("tasks", ())
        metrics.tasks_completed = sum(1 for item in final if item.done)

    safety = monitor_safety(records, config.d_s) if config.safety_monitor else None
    visits = (
        monitor_visits(records, config.tasks, config.eps_v, config.delta_v)
        if config.tasks
        else None
    )

    out_path = None
    if trace_path is not None:
        out_path = str(trace_path)
        with open(out_path, "w", encoding="utf-8") as fh:
            writer = trace.TraceWriter(fh, header=header)
            writer.write_batch(records)

    return RunResult(
        config=config,
        metrics=metrics,
        records=records,
        header=header,
        safety=safety,
        visits=visits,
        trace_path=out_path,
    )


def render_trace(result: RunResult) -> str:
    """The trace text that `run(..., trace_path=...)` would have written."""
    buf = io.StringIO()
    writer = trace.TraceWriter(buf, header=result.header)
    writer.write_batch(result.records)
    return buf.getvalue()


# ------------------------------------------------------------ fleet builders


def grid_starts(n: int, spacing: float = 1.5, z: float = 1.0) -> list[tuple]:
    """Centered grid of start poses, one per pid."""
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    out = []
    for i in range(n):
        x = (i % cols - (cols - 1) / 2.0) * spacing
        y = (i // cols - (rows - 1) / 2.0) * spacing
        out.append((x, y, z, 0.0))
    return out


def make_app_config(
    app: str,
    num_robots: int,
    duration: float = 20.0,
    seed: int = 0,
    safety_monitor: Optional[bool] = None,
    **overrides,
) -> SimConfig:
    """Programmatic config for a shipped app on an all-quad fleet."""
    from koordsim.config import app_source, default_workspace

    if safety_monitor is None:
        # formation demos steer by shared state, not route reservations
        safety_monitor = app == "task"
    dev = DeviceSpec(name="sim_quad", bot_type=motion.QUAD, planner="RRT_QUAD")
    starts = grid_starts(num_robots)
    robots = [RobotSpec(pid=i, on_device="sim_quad", start=starts[i]) for i in range(num_robots)]
    cfg = _SimConfig(
        num_robots=num_robots,
        robots=robots,
        devices={"sim_quad": dev},
        program_source=app_source(app),
        app=app,
        duration=duration,
        seed=seed,
        workspace=default_workspace(),
        safety_monitor=safety_monitor,
        **overrides,
    )
    return cfg


# --------------------------------------------------------- scaling experiment


@dataclass
class ScalingRow:
    num_robots: int
    packets_per_s: float
    bytes_per_s: float
    rounds: int


@dataclass
class ScalingReport:
    app: str
    rows: list[ScalingRow]
    exponent: Optional[float]  # log-log slope of fleet packets/s vs N

    def csv(self) -> str:
        lines = ["num_robots,packets_per_s,bytes_per_s,rounds"]
        for r in self.rows:
            lines.append(f"{r.num_robots},{r.packets_per_s:.6g},{r.bytes_per_s:.6g},{r.rounds}")
        exp = "N/A" if self.exponent is None else f"{self.exponent:.6g}"
        lines.append(f"# fitted_exponent,{exp}")
        return "\n".join(lines) + "\n"


def scaling_experiment(
    app: str,
    counts: list[int],
    duration: float = 10.0,
    seed: int = 0,
) -> ScalingReport:
    """Fleet-total message rate vs fleet size, with a log-log exponent fit."""
    rows = []
    for n in counts:
        cfg = make_app_config(app, n, duration=duration, seed=seed)
        result = run(cfg)
        span = max(result.metrics.sim_time, cfg.dt)
        rows.append(
            ScalingRow(
                num_robots=n,
                packets_per_s=result.metrics.total_packets / span,
                bytes_per_s=result.metrics.total_bytes / span,
                rounds=result.metrics.rounds,
            )
        )
    exponent = None
    usable = [(r.num_robots, r.packets_per_s) for r in rows if r.packets_per_s > 0]
    if len(usable) >= 2:
        xs = np.log([n for n, _ in usable])
        ys = np.log([p for _, p in usable])
        exponent = float(np.polyfit(xs, ys, 1)[0])
    return ScalingReport(app=app, rows=rows, exponent=exponent)
