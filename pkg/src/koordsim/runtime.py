"""Round-synchronous execution engine and distributed shared memory.

Each agent runs at most one event per round.  Shared reads during round r see
the snapshot fixed at the start of r; shared writes are buffered and become
visible fleet-wide at round r+1 (the agent's own writes are visible
immediately inside its effect).  Atomic events are arbitrated by a one-round
intent broadcast with lowest-pid priority.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from koordsim.lang import ast
from koordsim.lang.checker import CheckedProgram
from koordsim.lang.lower import AgentFault, EventTable, LoweredEvent, initial_value, lower
from koordsim.lang.parser import parse
from koordsim.lang.checker import check
from koordsim.planner import RouteReservation, Workspace
from koordsim.stdlib import IMPLS, SIGNATURES
from koordsim.transport import NetConfig, make_transport
from koordsim.values import TaskItem, points_of
from koordsim import wire


class StaleMessageError(Exception):
    """An update arrived after the synchrony tolerance window."""


@dataclass
class RoundClock:
    round: int = 0
    delta: float = 0.1
    epoch: float = 0.0

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("round period must be positive")

    def time_of(self, round_idx: int) -> float:
        return self.epoch + round_idx * self.delta


@dataclass
class PlannerEnv:
    """Planner-facing context an agent hands to path builtins."""

    workspace: Workspace
    kind: str
    smooth: bool
    d_s: float
    my_margin: float
    margins: dict[int, float]  # pid -> tracking margin while moving
    seed_base: int
    round: int = 0

    def clearance_for(self, res: RouteReservation) -> float:
        other = self.margins.get(res.pid, 0.0) if len(res.path) > 1 else 0.0
        return 2.0 * self.d_s + self.my_margin + other

    def plan_seed(self, pid: int, attempt: int) -> int:
        return (self.seed_base * 1_000_003 + self.round * 8191 + pid * 131 + attempt) & 0x7FFFFFFF


@dataclass
class SharedStore:
    """Per-agent view of the shared variables."""

    base: dict[str, Any] = field(default_factory=dict)
    snapshot: dict[str, Any] = field(default_factory=dict)
    write_buffer: dict[tuple[str, Optional[int]], Any] = field(default_factory=dict)
    inbox: list = field(default_factory=list)  # (sender, round, name, index, value)
    applied: set = field(default_factory=set)

    def take_snapshot(self) -> dict[str, Any]:
        self.snapshot = {
            name: list(v) if isinstance(v, list) else v for name, v in self.base.items()
        }
        return self.snapshot


@dataclass
class RoundReport:
    pid: int
    event: Optional[str] = None
    atomic: bool = False
    granted: bool = True
    intents: int = 0
    sent: int = 0
    notes: list[str] = field(default_factory=list)
    conflicts: list[str] = field(default_factory=list)
    fault: Optional[str] = None


class _Ctx:
    """StoreContext implementation binding the evaluator to an agent."""

    def __init__(self, agent: "AgentRuntime", readonly: bool):
        self.agent = agent
        self.readonly = readonly
        self.pid = agent.pid
        self.num_agents = agent.num_agents
        self.scratch = agent.scratch
        self.planner_env = agent.planner_env

    # -- variable access ------------------------------------------------

    def read(self, name: str):
        a = self.agent
        if name in a.locals:
            return a.locals[name]
        key = (name, None)
        if key in a.store.write_buffer:
            return a.store.write_buffer[key]
        value = a.store.snapshot[name]
        if isinstance(value, tuple) and name in a.global_lists:
            # fold buffered entry writes into the view
            items = list(value)
            for (n, idx), v in a.store.write_buffer.items():
                if n == name and idx is not None:
                    items[idx] = v
            return tuple(items)
        return value

    def read_cell(self, name: str, index: int):
        a = self.agent
        key = (name, index)
        if key in a.store.write_buffer:
            return a.store.write_buffer[key]
        return a.store.snapshot[name][index]

    def _guard_write(self, name: str):
        if self.readonly:
            raise AgentFault(f"write to {name!r} during precondition evaluation")

    def write(self, name: str, value):
        self._guard_write(name)
        a = self.agent
        if name in a.locals:
            a.locals[name] = value
        else:
            a.store.write_buffer[(name, None)] = value

    def write_cell(self, name: str, index: int, value):
        self._guard_write(name)
        self.agent.store.write_buffer[(name, index)] = value

    def write_list_entry(self, name: str, index: int, item: TaskItem):
        self.write_cell(name, index, item)

    # -- ports / motion --------------------------------------------------

    def read_port(self, port: str):
        psn, reached = self.agent.latched_ports
        return psn if port == "psn" else reached

    def actuate_route(self, value):
        self._guard_write("Motion.route")
        if isinstance(value, tuple) and len(value) == 3 and not isinstance(value[0], TaskItem):
            waypoints = [value]
        else:
            waypoints = points_of(value)
        self.agent.pending_route = waypoints

    # -- builtins ---------------------------------------------------------

    def reservations(self) -> list[RouteReservation]:
        a = self.agent
        if a.route_var is None:
            return []
        cells = a.store.snapshot[a.route_var]
        out = []
        for pid, items in enumerate(cells):
            if pid == a.pid:
                continue
            pts = points_of(items)
            out.append(RouteReservation(pid=pid, path=pts, active=bool(pts)))
        return out

    def note(self, text: str) -> None:
        self.agent.pending_notes.append(text)

    def call_builtin(self, name: str, args: list, arg_names: list):
        sig = SIGNATURES[name]
        if self.readonly and sig.effect != "pure":
            raise AgentFault(f"builtin {name} has effects; not allowed in a precondition")
        return IMPLS[name](self, args, arg_names)


class AgentRuntime:
    """One agent: event table + shared store + round bookkeeping."""

    def __init__(
        self,
        pid: int,
        table: EventTable,
        transport,
        clock: Optional[RoundClock] = None,
        motion_read: Optional[Callable[[], tuple]] = None,
        motion_actuate: Optional[Callable[[list], None]] = None,
        planner_env: Optional[PlannerEnv] = None,
        init: Optional[dict[str, Any]] = None,
    ):
        checked = table.checked
        self.pid = pid
        self.num_agents = checked.num_agents
        if not 0 <= pid < self.num_agents:
            raise ValueError(f"pid {pid} outside [0, {self.num_agents})")
        self.table = table
        self.transport = transport
        self.clock = clock or RoundClock()
        self.round = 0
        self.motion_read = motion_read or (lambda: ((0.0, 0.0, 0.0), True))
        self.motion_actuate = motion_actuate or (lambda wps: None)
        self.planner_env = planner_env
        self.scratch: dict[str, Any] = {}
        self.fault: Optional[str] = None
        self.latched_ports: tuple = ((0.0, 0.0, 0.0), True)
        self.pending_route: Optional[list] = None
        self.pending_notes: list[str] = []
        self.selected: Optional[LoweredEvent] = None
        self.granted = False
        self._intents: dict[int, dict[int, set[int]]] = {}  # round -> scope -> pids
        self._conflicts: list[str] = []

        self.vartable = [
            wire.VarInfo(d.name, d.base_type, d.indexed_by_pid) for d in checked.shared_vars
        ]
        self.var_ids = {v.name: i for i, v in enumerate(self.vartable)}
        self.global_lists = {
            d.name for d in checked.shared_vars if d.base_type == "poslist" and not d.indexed_by_pid
        }
        self.route_var = next(
            (d.name for d in checked.shared_vars if d.base_type == "poslist" and d.indexed_by_pid),
            None,
        )

        self.locals: dict[str, Any] = {}
        self.store = SharedStore()
        init = init or {}
        for d in checked.program.decls:
            value = init.get(d.name, None)
            if d.scope == ast.LOCAL:
                self.locals[d.name] = value if value is not None else initial_value(d)
                continue
            if d.indexed_by_pid:
                if value is not None:
                    cells = list(value)
                    if len(cells) != self.num_agents:
                        raise ValueError(
                            f"init for {d.name!r} needs {self.num_agents} cells, got {len(cells)}"
                        )
                else:
                    cells = [initial_value(d) for _ in range(self.num_agents)]
                self.store.base[d.name] = cells
            else:
                self.store.base[d.name] = value if value is not None else initial_value(d)
        self.store.take_snapshot()

    # ------------------------------------------------------------ messaging

    def _drain(self, now: float) -> None:
        for payload, _sender in self.transport.poll(self.pid, now):
            msg = wire.decode(payload, self.vartable)
            if msg.kind == wire.KIND_WRITE:
                name = self.vartable[msg.var_id].name
                self.store.inbox.append((msg.sender, msg.round, name, msg.index, msg.value))
            elif msg.kind == wire.KIND_ATOMIC_INTENT:
                if msg.round >= self.round:
                    self._intents.setdefault(msg.round, {}).setdefault(
                        msg.var_id, set()
                    ).add(msg.sender)

    # ---------------------------------------------------------- round phases

    def begin_round(self, now: float) -> dict[str, Any]:
        """Fix the snapshot for this round: apply all writes from round r-1
        (and up to one round late), then latch Motion ports."""
        if self.fault:
            return self.store.snapshot
        self._drain(now)
        due: list = []
        keep: list = []
        for entry in self.store.inbox:
            sender, rnd, name, index, value = entry
            if rnd <= self.round - 1:
                if rnd < self.round - 2:
                    raise StaleMessageError(
                        f"pid {self.pid}: message from round {rnd} arrived at round {self.round}"
                    )
                key = (sender, rnd, name, index)
                if key not in self.store.applied:
                    self.store.applied.add(key)
                    due.append(entry)
            else:
                keep.append(entry)
        self.store.inbox = keep
        # same-cell conflicts resolve to the lowest sender pid
        groups: dict[tuple, list] = {}
        for entry in due:
            groups.setdefault((entry[2], entry[3]), []).append(entry)
        self._conflicts = []
        for (name, index), entries in sorted(
            groups.items(), key=lambda kv: (self.var_ids[kv[0][0]], -1 if kv[0][1] is None else kv[0][1])
        ):
            entries.sort(key=lambda e: e[0])
            if len({e[0] for e in entries}) > 1:
                self._conflicts.append(
                    f"var={name} index={index} senders={sorted({e[0] for e in entries})}"
                )
            winner = entries[0]
            self._apply(name, index, winner[4])
        if len(self.store.applied) > 4096:
            horizon = self.round - 2
            self.store.applied = {k for k in self.store.applied if k[1] >= horizon}
        self.latched_ports = self._read_motion()
        if self.planner_env is not None:
            self.planner_env.round = self.round
        return self.store.take_snapshot()

    def _read_motion(self) -> tuple:
        psn, reached = self.motion_read()
        if hasattr(psn, "position"):
            psn = psn.position()
        return (tuple(float(c) for c in psn), bool(reached))

    def _apply(self, name: str, index, value) -> None:
        base = self.store.base
        if index is None:
            base[name] = value
        elif isinstance(base[name], list):
            base[name][index] = value
        else:  # entry write into a global list
            items = list(base[name])
            if 0 <= index < len(items):
                items[index] = value
                base[name] = tuple(items)

    def select_event(self) -> Optional[LoweredEvent]:
        """First event in source order whose precondition holds."""
        self.selected = None
        self.granted = False
        if self.fault:
            return None
        ctx = _Ctx(self, readonly=True)
        try:
            for ev in self.table:
                if ev.pre(ctx):
                    self.selected = ev
                    return ev
        except AgentFault as exc:
            self.fault = str(exc)
        return None

    def send_intent(self, now: float) -> None:
        ev = self.selected
        if ev is None or not ev.atomic or self.fault:
            return
        msg = wire.UpdateMsg(
            sender=self.pid,
            round=self.round,
            var_id=ev.index,
            index=None,
            value=None,
            kind=wire.KIND_ATOMIC_INTENT,
        )
        self.transport.broadcast(self.pid, wire.encode(msg, self.vartable), now)
        self._intents.setdefault(self.round, {}).setdefault(ev.index, set()).add(self.pid)

    def arbitrate(self, now: float) -> bool:
        """Lowest pid among same-scope intents wins; uncontested intents are
        granted by default (correct only under timely, lossless delivery)."""
        if self.fault or self.selected is None:
            self.granted = False
            return False
        if not self.selected.atomic:
            self.granted = True
            return True
        self._drain(now)
        competing = self._intents.get(self.round, {}).get(self.selected.index, {self.pid})
        self.granted = self.pid == min(competing)
        return self.granted

    def intent_count(self) -> int:
        if self.selected is None or not self.selected.atomic:
            return 0
        return len(self._intents.get(self.round, {}).get(self.selected.index, set()))

    def execute(self) -> None:
        """Run the selected (and granted) event's effect; buffered shared
        writes stay local until commit; route actuations fire at effect end."""
        self.pending_notes = []
        self.pending_route = None
        if self.fault or self.selected is None or not self.granted:
            return
        ctx = _Ctx(self, readonly=False)
        try:
            self.selected.run(ctx)
        except AgentFault as exc:
            self.fault = str(exc)
            self.store.write_buffer.clear()
            self.pending_route = None
            return
        if self.pending_route is not None:
            try:
                self.motion_actuate(self.pending_route)
            except (AgentFault, ValueError) as exc:
                self.fault = str(exc)
                self.store.write_buffer.clear()

    def commit_round(self, now: float) -> int:
        """Broadcast one write message per distinct (var, index); advance the
        round counter."""
        sent = 0
        if not self.fault:
            for (name, index), value in self.store.write_buffer.items():
                msg = wire.UpdateMsg(
                    sender=self.pid,
                    round=self.round,
                    var_id=self.var_ids[name],
                    index=index,
                    value=value,
                    kind=wire.KIND_WRITE,
                )
                self.transport.broadcast(self.pid, wire.encode(msg, self.vartable), now)
                self.store.inbox.append((self.pid, self.round, name, index, value))
                sent += 1
        self.store.write_buffer.clear()
        self._intents.pop(self.round - 1, None)
        self.round += 1
        return sent


# ------------------------------------------------------------- round driving


def run_round(agents: list[AgentRuntime], transport, now: float, round_idx: int) -> list[RoundReport]:
    """Advance one synchronized round: begin -> select -> arbitrate ->
    execute -> commit, polling the transport between phases."""
    transport.current_round = round_idx
    for a in agents:
        a.begin_round(now)
    for a in agents:
        a.select_event()
    for a in agents:
        a.send_intent(now)
    reports = []
    for a in agents:
        a.arbitrate(now)
    for a in agents:
        a.execute()
    for a in agents:
        intents = a.intent_count()  # before commit advances the round
        sent = a.commit_round(now)
        reports.append(
            RoundReport(
                pid=a.pid,
                event=a.selected.name if a.selected else None,
                atomic=bool(a.selected and a.selected.atomic),
                granted=a.granted,
                intents=intents,
                sent=sent,
                notes=list(a.pending_notes),
                conflicts=list(a._conflicts),
                fault=a.fault,
            )
        )
    return reports


def compile_program(source: str, num_agents: int) -> EventTable:
    """tokenize + parse + check + lower; raises ValueError on diagnostics."""
    program = parse(source)
    checked, diags = check(program, num_agents)
    if checked is None:
        raise ValueError("; ".join(d.render() for d in diags))
    return lower(checked)


def run_fleet(
    source: str,
    num_agents: int,
    rounds: int,
    init: Optional[dict[str, Any]] = None,
    net: Optional[NetConfig] = None,
    delta: float = 0.1,
    snapshot_hook: Optional[Callable[[int, list[dict]], None]] = None,
):
    """Convenience driver for motion-less programs (testing, averaging runs).

    Returns (agents, transport, reports-per-round).
    """
    table = compile_program(source, num_agents)
    pids = list(range(num_agents))
    transport = make_transport(pids, net or NetConfig())
    clock = RoundClock(delta=delta)
    agents = [
        AgentRuntime(pid, table, transport, clock=clock, init=init) for pid in pids
    ]
    history = []
    for r in range(rounds):
        now = clock.time_of(r)
        transport.current_round = r
        for a in agents:
            a.begin_round(now)
        if snapshot_hook is not None:
            snapshot_hook(r, [dict(a.store.snapshot) for a in agents])
        for a in agents:
            a.select_event()
        for a in agents:
            a.send_intent(now)
        for a in agents:
            a.arbitrate(now)
        for a in agents:
            a.execute()
        reports = []
        for a in agents:
            intents = a.intent_count()  # before commit advances the round
            sent = a.commit_round(now)
            reports.append(
                RoundReport(
                    pid=a.pid,
                    event=a.selected.name if a.selected else None,
                    atomic=bool(a.selected and a.selected.atomic),
                    granted=a.granted,
                    intents=intents,
                    sent=sent,
                    fault=a.fault,
                )
            )
        history.append(reports)
    transport.close()
    return agents, transport, history
