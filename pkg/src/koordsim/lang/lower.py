"""Lowering to an interpretable event table.

Each event becomes a LoweredEvent whose `pre` and `run` callables evaluate the
AST against an abstract store context.  The context supplies variable reads
and buffered writes, Motion port access, and builtin dispatch; both the
runtime store and lightweight test stores implement it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol

from koordsim.lang import ast
from koordsim.lang.checker import CheckedProgram
from koordsim.stdlib import IMPLS, SIGNATURES
from koordsim.values import default_value


class AgentFault(Exception):
    """Runtime fault inside an event effect (e.g. division by zero)."""


class StoreContext(Protocol):
    pid: int
    num_agents: int

    def read(self, name: str) -> Any: ...
    def read_cell(self, name: str, index: int) -> Any: ...
    def write(self, name: str, value: Any) -> None: ...
    def write_cell(self, name: str, index: int, value: Any) -> None: ...
    def read_port(self, port: str) -> Any: ...
    def actuate_route(self, waypoints) -> None: ...
    def call_builtin(self, name: str, args: list, arg_names: list) -> Any: ...


@dataclass
class LoweredEvent:
    index: int
    name: str
    atomic: bool
    pre_expr: ast.Expr
    eff_stmts: list[ast.Stmt]
    vars: dict[str, ast.VarDecl]

    def pre(self, ctx: StoreContext) -> bool:
        return bool(_eval(self.pre_expr, ctx, self.vars))

    def run(self, ctx: StoreContext) -> None:
        pending_routes: list[Any] = []
        for st in self.eff_stmts:
            _exec(st, ctx, self.vars, pending_routes)
        # actuator writes are forwarded at effect end; last one wins
        if pending_routes:
            ctx.actuate_route(pending_routes[-1])


@dataclass
class EventTable:
    events: list[LoweredEvent]
    checked: CheckedProgram

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)


def lower(checked: CheckedProgram) -> EventTable:
    """Lower a checked program; event order is preserved from source."""
    events = [
        LoweredEvent(
            index=i,
            name=ev.name,
            atomic=ev.atomic,
            pre_expr=ev.pre,
            eff_stmts=ev.eff,
            vars=checked.vars,
        )
        for i, ev in enumerate(checked.program.events)
    ]
    return EventTable(events=events, checked=checked)


def initial_value(decl: ast.VarDecl):
    """Value of a declaration before any config injection."""
    if decl.init is None:
        return default_value(decl.base_type)
    v = _const(decl.init)
    if decl.base_type == "float":
        v = float(v)
    return v


def _const(e: ast.Expr):
    if isinstance(e, ast.Lit):
        return e.value
    if isinstance(e, ast.Unary) and e.op == "-":
        return -_const(e.operand)
    raise ValueError("non-constant initializer")


# ------------------------------------------------------------------ evaluator


def _pos_binop(op: str, a, b):
    if op == "+":
        return (a[0] + b[0], a[1] + b[1], a[2] + b[2])
    if op == "-":
        return (a[0] - b[0], a[1] - b[1], a[2] - b[2])
    raise AgentFault(f"bad pos operator {op}")


def _eval(e: ast.Expr, ctx: StoreContext, vars: dict[str, ast.VarDecl]):
    if isinstance(e, ast.Lit):
        return e.value
    if isinstance(e, ast.Name):
        if e.ident == "pid":
            return ctx.pid
        if e.ident == "numAgents":
            return ctx.num_agents
        return ctx.read(e.ident)
    if isinstance(e, ast.Index):
        idx = _eval(e.index, ctx, vars)
        decl = vars[e.base]
        if decl.indexed_by_pid:
            return ctx.read_cell(e.base, idx % ctx.num_agents)
        lst = ctx.read(e.base)
        if not lst:
            raise AgentFault(f"indexing empty list {e.base!r}")
        return lst[idx % len(lst)].point
    if isinstance(e, ast.PortRead):
        return ctx.read_port(e.port)
    if isinstance(e, ast.Unary):
        v = _eval(e.operand, ctx, vars)
        if e.op == "!":
            return not v
        if isinstance(v, tuple):
            return (-v[0], -v[1], -v[2])
        return -v
    if isinstance(e, ast.Binary):
        op = e.op
        if op == "&&":
            return bool(_eval(e.left, ctx, vars)) and bool(_eval(e.right, ctx, vars))
        if op == "||":
            return bool(_eval(e.left, ctx, vars)) or bool(_eval(e.right, ctx, vars))
        a = _eval(e.left, ctx, vars)
        b = _eval(e.right, ctx, vars)
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        a_pos = isinstance(a, tuple)
        b_pos = isinstance(b, tuple)
        if op == "+" or op == "-":
            if a_pos or b_pos:
                return _pos_binop(op, a, b)
            return a + b if op == "+" else a - b
        if op == "*":
            if a_pos:
                return (a[0] * b, a[1] * b, a[2] * b)
            if b_pos:
                return (b[0] * a, b[1] * a, b[2] * a)
            return a * b
        if op == "/":
            try:
                if a_pos:
                    return (a[0] / b, a[1] / b, a[2] / b)
                return a / b
            except ZeroDivisionError:
                raise AgentFault(f"division by zero at {e.line}:{e.col}") from None
        if op == "%":
            if b == 0:
                raise AgentFault(f"modulo by zero at {e.line}:{e.col}")
            return a % b
        raise AgentFault(f"bad operator {op}")  # pragma: no cover
    if isinstance(e, ast.Call):
        args = [_eval(a, ctx, vars) for a in e.args]
        names = [a.ident if isinstance(a, ast.Name) else None for a in e.args]
        return ctx.call_builtin(e.func, args, names)
    raise TypeError(e)  # pragma: no cover


def _exec(st: ast.Stmt, ctx: StoreContext, vars: dict[str, ast.VarDecl], pending_routes: list) -> None:
    if isinstance(st, ast.Assign):
        value = _eval(st.value, ctx, vars)
        target = st.target
        if isinstance(target, ast.Name):
            decl = vars[target.ident]
            if decl.base_type == "float" and isinstance(value, int):
                value = float(value)
            ctx.write(target.ident, value)
        else:
            assert isinstance(target, ast.Index)
            decl = vars[target.base]
            idx = _eval(target.index, ctx, vars) % ctx.num_agents
            if decl.base_type == "float" and isinstance(value, int):
                value = float(value)
            ctx.write_cell(target.base, idx, value)
    elif isinstance(st, ast.ActuateRoute):
        pending_routes.append(_eval(st.value, ctx, vars))
    elif isinstance(st, ast.If):
        branch = st.then if _eval(st.cond, ctx, vars) else st.orelse
        for s in branch:
            _exec(s, ctx, vars, pending_routes)
    elif isinstance(st, ast.CallStmt):
        _eval(st.call, ctx, vars)
    else:  # pragma: no cover
        raise TypeError(st)
