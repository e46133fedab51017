import pytest

from koordsim.lang import check, lower, parse
from koordsim.lang.lower import AgentFault, initial_value
from koordsim.stdlib import IMPLS


class DictCtx:
    """Minimal StoreContext over plain dicts for evaluator tests."""

    def __init__(self, pid=0, num_agents=4, values=None, ports=None):
        self.pid = pid
        self.num_agents = num_agents
        self.values = values or {}
        self.ports = ports or {"psn": (0.0, 0.0, 0.0), "reached": True}
        self.routes = []
        self.scratch = {}
        self.planner_env = None

    def read(self, name):
        return self.values[name]

    def read_cell(self, name, index):
        return self.values[name][index]

    def write(self, name, value):
        self.values[name] = value

    def write_cell(self, name, index, value):
        self.values[name][index] = value

    def read_port(self, port):
        return self.ports[port]

    def actuate_route(self, waypoints):
        self.routes.append(waypoints)

    def note(self, text):
        pass

    def write_list_entry(self, name, index, item):
        lst = list(self.values[name])
        lst[index] = item
        self.values[name] = tuple(lst)

    def call_builtin(self, name, args, arg_names):
        return IMPLS[name](self, args, arg_names)


def table_of(src, n=4):
    checked, diags = check(parse(src), n)
    assert checked is not None, diags
    return lower(checked)


def event_src(eff, decls="", pre="true", atomic=""):
    return f"{decls}event E {atomic}{{\n pre: {pre}\n eff: {{ {eff} }} \n}}"


def test_pid_and_num_agents():
    table = table_of(event_src("y = pid * 10 + numAgents", decls="local int y\n"))
    ctx = DictCtx(pid=2, num_agents=5, values={"y": 0})
    table.events[0].run(ctx)
    assert ctx.values["y"] == 25


def test_index_wraparound_modulo_num_agents():
    src = event_src("y = v[pid - 1] + v[pid + 1]", decls="allwrite int v[]\nlocal int y\n")
    table = table_of(src, n=3)
    ctx = DictCtx(pid=0, num_agents=3, values={"v": [10, 20, 30], "y": 0})
    table.events[0].run(ctx)
    assert ctx.values["y"] == 30 + 20  # v[-1] wraps to v[2], v[1] stays


def test_global_poslist_index_wraps_by_length():
    from koordsim.values import TaskItem

    src = event_src("p = tasks[3]", decls="allwrite poslist tasks\nlocal pos p\n")
    table = table_of(src)
    items = tuple(TaskItem((float(i), 0.0, 0.0)) for i in range(2))
    ctx = DictCtx(values={"tasks": items, "p": (0.0, 0.0, 0.0)})
    table.events[0].run(ctx)
    assert ctx.values["p"] == (1.0, 0.0, 0.0)  # 3 % 2 == 1


def test_division_by_zero_faults():
    table = table_of(event_src("y = 1 / (pid - pid)", decls="local float y\n"))
    with pytest.raises(AgentFault, match="division by zero"):
        table.events[0].run(DictCtx(values={"y": 0.0}))


def test_modulo_by_zero_faults():
    table = table_of(event_src("y = 1 % (pid - pid)", decls="local int y\n"))
    with pytest.raises(AgentFault, match="modulo by zero"):
        table.events[0].run(DictCtx(values={"y": 0}))


def test_int_coerced_to_float_on_assignment():
    table = table_of(event_src("f = 3", decls="local float f\n"))
    ctx = DictCtx(values={"f": 0.0})
    table.events[0].run(ctx)
    assert ctx.values["f"] == 3.0 and isinstance(ctx.values["f"], float)


def test_pos_arithmetic_elementwise():
    decls = "local pos a\nlocal pos b\nlocal pos c\n"
    table = table_of(event_src("c = (a + b) / 2.0", decls=decls))
    ctx = DictCtx(values={"a": (1.0, 2.0, 3.0), "b": (3.0, 2.0, 1.0), "c": None})
    table.events[0].run(ctx)
    assert ctx.values["c"] == (2.0, 2.0, 2.0)


def test_scalar_times_pos():
    decls = "local pos a\nlocal pos c\n"
    table = table_of(event_src("c = 2 * a", decls=decls))
    ctx = DictCtx(values={"a": (1.0, 2.0, 3.0), "c": None})
    table.events[0].run(ctx)
    assert ctx.values["c"] == (2.0, 4.0, 6.0)


def test_short_circuit_evaluation():
    # right operand would fault; && must not evaluate it when left is false
    src = event_src(
        "if (pid > 0 && 1 / (pid - pid) > 0) { y = 1 }", decls="local float y\n"
    )
    table = table_of(src)
    ctx = DictCtx(pid=0, values={"y": 0.0})
    table.events[0].run(ctx)  # no fault
    assert ctx.values["y"] == 0.0


def test_actuate_route_last_wins():
    decls = "local pos a\nlocal pos b\n"
    src = event_src("Motion.route = a\nMotion.route = b", decls=decls)
    table = table_of(src)
    ctx = DictCtx(values={"a": (1.0, 0.0, 0.0), "b": (2.0, 0.0, 0.0)})
    table.events[0].run(ctx)
    assert ctx.routes == [(2.0, 0.0, 0.0)]


def test_if_else_branches():
    src = event_src("if pid == 0 { y = 1 } else { y = 2 }", decls="local int y\n")
    table = table_of(src)
    ctx = DictCtx(pid=0, values={"y": 0})
    table.events[0].run(ctx)
    assert ctx.values["y"] == 1
    ctx = DictCtx(pid=3, values={"y": 0})
    table.events[0].run(ctx)
    assert ctx.values["y"] == 2


def test_port_reads():
    src = event_src("p = Motion.psn", decls="local pos p\n", pre="Motion.reached")
    table = table_of(src)
    ctx = DictCtx(ports={"psn": (1.0, 2.0, 0.0), "reached": True}, values={"p": None})
    assert table.events[0].pre(ctx)
    table.events[0].run(ctx)
    assert ctx.values["p"] == (1.0, 2.0, 0.0)


def test_initial_values():
    checked, _ = check(
        parse(
            "local int a = -1\nlocal float b = 2\nlocal bool c\nlocal pos p\n"
            + event_src("a = a")
        ),
        4,
    )
    decls = {d.name: d for d in checked.program.decls}
    assert initial_value(decls["a"]) == -1
    assert initial_value(decls["b"]) == 2.0 and isinstance(initial_value(decls["b"]), float)
    assert initial_value(decls["c"]) is False
    assert initial_value(decls["p"]) == (0.0, 0.0, 0.0)


def test_event_table_order_and_indices():
    src = (
        "local int y\n"
        "event A {\n pre: true\n eff: { y = 1 } \n}\n"
        "event B atomic {\n pre: false\n eff: { y = 2 } \n}\n"
    )
    table = table_of(src)
    assert [(e.index, e.name, e.atomic) for e in table] == [(0, "A", False), (1, "B", True)]
