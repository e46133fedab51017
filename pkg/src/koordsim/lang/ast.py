"""AST node definitions.

Position (`line`, `col`) and inferred-type (`ty`) fields are excluded from
structural equality so that parse/pretty-print round trips compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

# base types; "void" is internal (builtin calls used as statements)
INT, FLOAT, BOOL, POS, POSLIST, VOID = "int", "float", "bool", "pos", "poslist", "void"

ALLWRITE, ALLREAD, LOCAL = "allwrite", "allread", "local"

RESERVED = ("pid", "numAgents")


@dataclass
class Node:
    line: int = field(default=0, compare=False, kw_only=True)
    col: int = field(default=0, compare=False, kw_only=True)


# ---------------------------------------------------------------- expressions


@dataclass
class Expr(Node):
    ty: Optional[str] = field(default=None, compare=False, kw_only=True)


@dataclass
class Lit(Expr):
    value: Union[int, float, bool] = 0


@dataclass
class Name(Expr):
    ident: str = ""


@dataclass
class Index(Expr):
    base: str = ""
    index: Expr = None  # type: ignore[assignment]


@dataclass
class PortRead(Expr):
    port: str = ""  # "psn" | "reached"


@dataclass
class Unary(Expr):
    op: str = ""  # "-" | "!"
    operand: Expr = None  # type: ignore[assignment]


@dataclass
class Binary(Expr):
    op: str = ""
    left: Expr = None  # type: ignore[assignment]
    right: Expr = None  # type: ignore[assignment]


@dataclass
class Call(Expr):
    func: str = ""
    args: list[Expr] = field(default_factory=list)


# ----------------------------------------------------------------- statements


@dataclass
class Stmt(Node):
    pass


@dataclass
class Assign(Stmt):
    target: Expr = None  # Name or Index  # type: ignore[assignment]
    value: Expr = None  # type: ignore[assignment]


@dataclass
class ActuateRoute(Stmt):
    """`Motion.route = expr` — forwarded to the motion module at effect end."""

    value: Expr = None  # type: ignore[assignment]


@dataclass
class If(Stmt):
    cond: Expr = None  # type: ignore[assignment]
    then: list[Stmt] = field(default_factory=list)
    orelse: list[Stmt] = field(default_factory=list)


@dataclass
class CallStmt(Stmt):
    call: Call = None  # type: ignore[assignment]


# --------------------------------------------------------------- declarations


@dataclass
class VarDecl(Node):
    name: str = ""
    scope: str = LOCAL
    base_type: str = INT
    indexed_by_pid: bool = False
    init: Optional[Expr] = None


@dataclass
class EventDecl(Node):
    name: str = ""
    atomic: bool = False
    pre: Expr = None  # type: ignore[assignment]
    eff: list[Stmt] = field(default_factory=list)


@dataclass
class Program(Node):
    decls: list[VarDecl] = field(default_factory=list)
    events: list[EventDecl] = field(default_factory=list)
    uses_motion: bool = field(default=False, compare=False)
