"""Pretty-printer; parse(pretty(parse(s))) is structurally equal to parse(s)."""

from __future__ import annotations

from koordsim.lang import ast

_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 3,
    "<=": 3,
    ">": 3,
    ">=": 3,
    "+": 4,
    "-": 4,
    "*": 5,
    "/": 5,
    "%": 5,
}


def pretty(program: ast.Program) -> str:
    out: list[str] = []
    for d in program.decls:
        suffix = "[]" if d.indexed_by_pid else ""
        init = f" = {_expr(d.init)}" if d.init is not None else ""
        out.append(f"{d.scope} {d.base_type} {d.name}{suffix}{init}")
    if program.decls:
        out.append("")
    for ev in program.events:
        atomic = " atomic" if ev.atomic else ""
        out.append(f"event {ev.name}{atomic} {{")
        out.append(f"    pre: {_expr(ev.pre)}")
        out.append("    eff: {")
        _stmts(ev.eff, out, 2)
        out.append("    }")
        out.append("}")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def _stmts(stmts: list[ast.Stmt], out: list[str], depth: int) -> None:
    pad = "    " * depth
    for st in stmts:
        if isinstance(st, ast.Assign):
            out.append(f"{pad}{_expr(st.target)} = {_expr(st.value)}")
        elif isinstance(st, ast.ActuateRoute):
            out.append(f"{pad}Motion.route = {_expr(st.value)}")
        elif isinstance(st, ast.CallStmt):
            out.append(f"{pad}{_expr(st.call)}")
        elif isinstance(st, ast.If):
            out.append(f"{pad}if {_expr(st.cond)} {{")
            _stmts(st.then, out, depth + 1)
            if st.orelse:
                out.append(f"{pad}}} else {{")
                _stmts(st.orelse, out, depth + 1)
            out.append(f"{pad}}}")
        else:  # pragma: no cover
            raise TypeError(st)


def _expr(e: ast.Expr, parent_prec: int = 0) -> str:
    if isinstance(e, ast.Lit):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return repr(e.value)
    if isinstance(e, ast.Name):
        return e.ident
    if isinstance(e, ast.Index):
        return f"{e.base}[{_expr(e.index)}]"
    if isinstance(e, ast.PortRead):
        return f"Motion.{e.port}"
    if isinstance(e, ast.Unary):
        return f"{e.op}{_expr(e.operand, 6)}"
    if isinstance(e, ast.Binary):
        prec = _PREC[e.op]
        # right operand gets prec+1: all our binary ops associate left
        text = f"{_expr(e.left, prec)} {e.op} {_expr(e.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(e, ast.Call):
        return f"{e.func}({', '.join(_expr(a) for a in e.args)})"
    raise TypeError(e)  # pragma: no cover
