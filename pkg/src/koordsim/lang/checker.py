"""Name resolution, type checking, and shared-write validation."""

from __future__ import annotations

from dataclasses import dataclass, field

from koordsim.lang import ast
from koordsim.stdlib import SIGNATURES

_NUMERIC = ("int", "float")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    severity: str = "error"

    def render(self, filename: str = "<source>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.severity}: {self.message}"


@dataclass
class CheckedProgram:
    program: ast.Program
    num_agents: int
    # shared variables in declaration order; position is the wire var_id
    shared_vars: list[ast.VarDecl] = field(default_factory=list)
    vars: dict[str, ast.VarDecl] = field(default_factory=dict)

    def var_id(self, name: str) -> int:
        for i, d in enumerate(self.shared_vars):
            if d.name == name:
                return i
        raise KeyError(name)


class _Checker:
    def __init__(self, program: ast.Program, num_agents: int):
        self.program = program
        self.num_agents = num_agents
        self.diags: list[Diagnostic] = []
        self.vars: dict[str, ast.VarDecl] = {}
        self.in_pre = False
        self.current_event: ast.EventDecl | None = None

    def error(self, node: ast.Node, message: str) -> None:
        self.diags.append(Diagnostic(node.line, node.col, message))

    # ---------------------------------------------------------------- driver

    def run(self) -> CheckedProgram | None:
        seen_events: set[str] = set()
        for decl in self.program.decls:
            if decl.name in self.vars:
                self.error(decl, f"duplicate variable {decl.name!r}")
            elif decl.name in ast.RESERVED or decl.name in SIGNATURES or decl.name == "Motion":
                self.error(decl, f"{decl.name!r} is reserved")
            else:
                self.vars[decl.name] = decl
            if decl.init is not None:
                ty = self.expr(decl.init, const=True)
                if ty is not None and not self._assignable(decl.base_type, ty):
                    self.error(decl.init, f"initializer type {ty} does not match {decl.base_type}")
        for ev in self.program.events:
            if ev.name in seen_events:
                self.error(ev, f"duplicate event {ev.name!r}")
            seen_events.add(ev.name)
            self.current_event = ev
            self.in_pre = True
            ty = self.expr(ev.pre)
            if ty is not None and ty != "bool":
                self.error(ev.pre, f"event precondition must be bool, got {ty}")
            self.in_pre = False
            for st in ev.eff:
                self.stmt(st)
        if self.diags:
            return None
        shared = [d for d in self.program.decls if d.scope != ast.LOCAL]
        return CheckedProgram(
            program=self.program,
            num_agents=self.num_agents,
            shared_vars=shared,
            vars=dict(self.vars),
        )

    # ------------------------------------------------------------ statements

    def stmt(self, st: ast.Stmt) -> None:
        if isinstance(st, ast.Assign):
            self.check_write(st.target)
            tty = self.expr(st.target, lvalue=True)
            vty = self.expr(st.value)
            if tty is not None and vty is not None and not self._assignable(tty, vty):
                self.error(st, f"cannot assign {vty} to {tty}")
        elif isinstance(st, ast.ActuateRoute):
            vty = self.expr(st.value)
            if vty not in (None, "pos", "poslist"):
                self.error(st, f"Motion.route takes pos or poslist, got {vty}")
        elif isinstance(st, ast.If):
            cty = self.expr(st.cond)
            if cty is not None and cty != "bool":
                self.error(st.cond, f"if condition must be bool, got {cty}")
            for s in st.then:
                self.stmt(s)
            for s in st.orelse:
                self.stmt(s)
        elif isinstance(st, ast.CallStmt):
            self.expr(st.call)
        else:  # pragma: no cover
            raise TypeError(st)

    def check_write(self, target: ast.Expr) -> None:
        """Enforce the shared-write rules for the current event."""
        assert self.current_event is not None
        atomic = self.current_event.atomic
        if isinstance(target, ast.Name):
            decl = self.vars.get(target.ident)
            if decl is None:
                return  # resolution error reported by expr()
            if decl.scope == ast.ALLREAD:
                self.error(target, f"cannot write allread variable {decl.name!r}")
            elif decl.scope == ast.ALLWRITE and not atomic:
                self.error(target, "shared write requires atomic")
        elif isinstance(target, ast.Index):
            decl = self.vars.get(target.base)
            if decl is None:
                return
            own_cell = isinstance(target.index, ast.Name) and target.index.ident == "pid"
            if not decl.indexed_by_pid:
                if decl.scope == ast.ALLREAD:
                    self.error(target, f"cannot write allread variable {decl.name!r}")
                elif decl.scope == ast.ALLWRITE and not atomic:
                    self.error(target, "shared write requires atomic")
                return
            if decl.scope == ast.ALLREAD and not own_cell:
                self.error(target, f"allread variable {decl.name!r} is writable only at index pid")
            elif decl.scope == ast.ALLWRITE and not own_cell and not atomic:
                self.error(target, "shared write requires atomic")

    # ----------------------------------------------------------- expressions

    def expr(self, e: ast.Expr, lvalue: bool = False, const: bool = False) -> str | None:
        ty = self._expr(e, lvalue=lvalue, const=const)
        e.ty = ty
        return ty

    def _expr(self, e: ast.Expr, lvalue: bool, const: bool) -> str | None:
        if isinstance(e, ast.Lit):
            if isinstance(e.value, bool):
                return "bool"
            return "int" if isinstance(e.value, int) else "float"
        if const:
            if isinstance(e, ast.Unary) and e.op == "-" and isinstance(e.operand, ast.Lit):
                ty = self.expr(e.operand)
                return ty if ty in _NUMERIC else None
            self.error(e, "initializer must be a literal")
            return None
        if isinstance(e, ast.Name):
            if e.ident == "pid" or e.ident == "numAgents":
                return "int"
            decl = self.vars.get(e.ident)
            if decl is None:
                self.error(e, f"undeclared identifier {e.ident!r}")
                return None
            if decl.indexed_by_pid and not lvalue:
                self.error(e, f"{e.ident!r} is pid-indexed; use {e.ident}[...]")
                return None
            if decl.indexed_by_pid and lvalue:
                self.error(e, f"{e.ident!r} is pid-indexed; assign to {e.ident}[pid]")
                return None
            return decl.base_type
        if isinstance(e, ast.Index):
            decl = self.vars.get(e.base)
            if decl is None:
                self.error(e, f"undeclared identifier {e.base!r}")
                return None
            ity = self.expr(e.index)
            if ity is not None and ity != "int":
                self.error(e.index, f"index must be int, got {ity}")
            if decl.indexed_by_pid:
                return decl.base_type
            if decl.base_type == "poslist":
                if lvalue:
                    self.error(e, "entries of a shared list are written via builtins")
                    return None
                return "pos"
            self.error(e, f"{e.base!r} is not indexable")
            return None
        if isinstance(e, ast.PortRead):
            return "pos" if e.port == "psn" else "bool"
        if isinstance(e, ast.Unary):
            ty = self.expr(e.operand)
            if ty is None:
                return None
            if e.op == "!":
                if ty != "bool":
                    self.error(e, f"operator ! needs bool, got {ty}")
                    return None
                return "bool"
            if ty in _NUMERIC or ty == "pos":
                return ty
            self.error(e, f"operator - needs a numeric operand, got {ty}")
            return None
        if isinstance(e, ast.Binary):
            return self._binary(e)
        if isinstance(e, ast.Call):
            return self._call(e)
        raise TypeError(e)  # pragma: no cover

    def _binary(self, e: ast.Binary) -> str | None:
        lt = self.expr(e.left)
        rt = self.expr(e.right)
        if lt is None or rt is None:
            return None
        op = e.op
        if op in ("&&", "||"):
            if lt == rt == "bool":
                return "bool"
            self.error(e, f"operator {op} needs bool operands")
            return None
        if op in ("==", "!="):
            if lt == rt or {lt, rt} <= set(_NUMERIC):
                return "bool"
            self.error(e, f"cannot compare {lt} with {rt}")
            return None
        if op in ("<", "<=", ">", ">="):
            if lt in _NUMERIC and rt in _NUMERIC:
                return "bool"
            self.error(e, f"operator {op} needs numeric operands")
            return None
        if op == "%":
            if lt == rt == "int":
                return "int"
            self.error(e, "operator % needs int operands")
            return None
        if op == "/":
            if lt == "pos" and rt in _NUMERIC:
                return "pos"
            if lt in _NUMERIC and rt in _NUMERIC:
                return "float"
            self.error(e, f"cannot divide {lt} by {rt}")
            return None
        # + - *
        if lt == "pos" or rt == "pos":
            if op in ("+", "-") and lt == rt == "pos":
                return "pos"
            if op == "*" and ("pos" in (lt, rt)) and (lt in _NUMERIC or rt in _NUMERIC):
                return "pos"
            self.error(e, f"invalid pos arithmetic: {lt} {op} {rt}")
            return None
        if lt in _NUMERIC and rt in _NUMERIC:
            return "float" if "float" in (lt, rt) else "int"
        self.error(e, f"invalid operands: {lt} {op} {rt}")
        return None

    def _call(self, e: ast.Call) -> str | None:
        sig = SIGNATURES.get(e.func)
        if sig is None:
            self.error(e, f"unknown function {e.func!r}")
            return None
        assert self.current_event is not None
        if sig.effect == "shared_write":
            if self.in_pre:
                self.error(e, f"{e.func} has effects and cannot appear in a precondition")
            elif not self.current_event.atomic:
                self.error(e, "shared write requires atomic")
        if len(e.args) != len(sig.params):
            self.error(e, f"{e.func} takes {len(sig.params)} argument(s), got {len(e.args)}")
            return sig.result
        for k, (arg, want) in enumerate(zip(e.args, sig.params)):
            got = self.expr(arg)
            if got is not None and not self._assignable(want, got):
                self.error(arg, f"argument {k + 1} of {e.func} must be {want}, got {got}")
            if k in sig.var_params:
                if not (isinstance(arg, ast.Name) and arg.ident in self.vars):
                    self.error(arg, f"argument {k + 1} of {e.func} must name a shared variable")
                elif self.vars[arg.ident].scope == ast.LOCAL:
                    self.error(arg, f"argument {k + 1} of {e.func} must name a shared variable")
        return sig.result

    @staticmethod
    def _assignable(target: str, value: str) -> bool:
        if target == value:
            return True
        return target == "float" and value == "int"


def check(program: ast.Program, num_agents: int) -> tuple[CheckedProgram | None, list[Diagnostic]]:
    """Resolve and type-check; returns (CheckedProgram or None, diagnostics)."""
    if num_agents <= 0:
        raise ValueError("num_agents must be positive")
    checker = _Checker(program, num_agents)
    checked = checker.run()
    return checked, checker.diags
