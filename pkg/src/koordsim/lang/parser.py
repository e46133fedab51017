"""Recursive-descent parser producing a Program AST.

Grammar (declarations first, then events; statements newline-terminated,
braces for blocks):

    program  := decl* event+
    decl     := scope type IDENT "[]"? ("=" expr)? NEWLINE
    event    := "event" IDENT "atomic"? "{" "pre" ":" expr  "eff" ":" block "}"
    block    := "{" stmt* "}"
    stmt     := lvalue "=" expr | "if" expr block ("else" (block | if))?
              | IDENT "(" args ")"
"""

from __future__ import annotations

from koordsim.lang import ast
from koordsim.lang.lexer import Token, tokenize

_SCOPES = {"allwrite", "allread", "local"}
_TYPES = {"int", "float", "bool", "pos", "poslist"}
_CMP_OPS = {"==", "!=", "<", "<=", ">", ">="}


class ParseError(Exception):
    def __init__(self, message: str, token: Token, expected: tuple[str, ...] = ()):
        loc = f"{token.line}:{token.col}"
        if expected:
            message = f"{message} (expected one of: {', '.join(sorted(expected))})"
        super().__init__(f"{loc}: {message}")
        self.message = message
        self.line = token.line
        self.col = token.col
        self.expected = expected


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.uses_motion = False

    # ------------------------------------------------------------- utilities

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def match(self, *kinds: str) -> Token | None:
        if self.peek().kind in kinds:
            return self.advance()
        return None

    def expect(self, *kinds: str) -> Token:
        tok = self.peek()
        if tok.kind in kinds:
            return self.advance()
        raise ParseError(f"unexpected {tok.kind!r}", tok, expected=kinds)

    def skip_newlines(self) -> None:
        while self.peek().kind == "NEWLINE":
            self.advance()

    def end_of_stmt(self) -> None:
        if self.peek().kind == "}":
            return  # allow statement directly before a closing brace
        self.expect("NEWLINE")
        self.skip_newlines()

    # --------------------------------------------------------------- program

    def program(self) -> ast.Program:
        self.skip_newlines()
        decls: list[ast.VarDecl] = []
        while self.peek().kind in _SCOPES:
            decls.append(self.decl())
            self.skip_newlines()
        events: list[ast.EventDecl] = []
        while self.peek().kind == "event":
            events.append(self.event())
            self.skip_newlines()
        self.expect("EOF")
        return ast.Program(decls=decls, events=events, uses_motion=self.uses_motion)

    def decl(self) -> ast.VarDecl:
        scope_tok = self.expect(*_SCOPES)
        type_tok = self.expect(*_TYPES)
        name_tok = self.expect("IDENT")
        indexed = False
        if self.match("["):
            self.expect("]")
            indexed = True
        init = None
        if self.match("="):
            init = self.expr()
        self.expect("NEWLINE")
        return ast.VarDecl(
            name=name_tok.text,
            scope=scope_tok.kind,
            base_type=type_tok.kind,
            indexed_by_pid=indexed,
            init=init,
            line=name_tok.line,
            col=name_tok.col,
        )

    def event(self) -> ast.EventDecl:
        kw = self.expect("event")
        name_tok = self.expect("IDENT")
        atomic = self.match("atomic") is not None
        self.expect("{")
        self.skip_newlines()
        self.expect("pre")
        self.expect(":")
        pre = self.expr()
        self.expect("NEWLINE")
        self.skip_newlines()
        self.expect("eff")
        self.expect(":")
        eff = self.block()
        if not eff:
            raise ParseError(f"event {name_tok.text!r} has an empty effect", kw)
        self.skip_newlines()
        self.expect("}")
        if self.peek().kind != "EOF":
            self.expect("NEWLINE")
        return ast.EventDecl(
            name=name_tok.text,
            atomic=atomic,
            pre=pre,
            eff=eff,
            line=kw.line,
            col=kw.col,
        )

    # ------------------------------------------------------------ statements

    def block(self) -> list[ast.Stmt]:
        self.expect("{")
        self.skip_newlines()
        stmts: list[ast.Stmt] = []
        while self.peek().kind != "}":
            stmts.append(self.stmt())
        self.expect("}")
        return stmts

    def stmt(self) -> ast.Stmt:
        tok = self.peek()
        if tok.kind == "if":
            return self.if_stmt()
        if tok.kind == "IDENT" and tok.text == "Motion" and self.peek(1).kind == ".":
            self.advance()
            self.advance()
            port = self.expect("IDENT")
            if port.text != "route":
                raise ParseError(f"cannot assign to Motion.{port.text}", port)
            self.expect("=")
            value = self.expr()
            self.end_of_stmt()
            self.uses_motion = True
            return ast.ActuateRoute(value=value, line=tok.line, col=tok.col)
        if tok.kind == "IDENT":
            if self.peek(1).kind == "(":
                call = self.call(self.advance())
                self.end_of_stmt()
                return ast.CallStmt(call=call, line=tok.line, col=tok.col)
            target: ast.Expr
            name_tok = self.advance()
            if self.match("["):
                idx = self.expr()
                self.expect("]")
                target = ast.Index(
                    base=name_tok.text, index=idx, line=name_tok.line, col=name_tok.col
                )
            else:
                target = ast.Name(
                    ident=name_tok.text, line=name_tok.line, col=name_tok.col
                )
            self.expect("=")
            value = self.expr()
            self.end_of_stmt()
            return ast.Assign(target=target, value=value, line=tok.line, col=tok.col)
        raise ParseError(f"unexpected {tok.kind!r} at start of statement", tok)

    def if_stmt(self) -> ast.Stmt:
        kw = self.expect("if")
        cond = self.expr()
        then = self.block()
        orelse: list[ast.Stmt] = []
        if self.match("else"):
            if self.peek().kind == "if":
                orelse = [self.if_stmt()]
                return ast.If(cond=cond, then=then, orelse=orelse, line=kw.line, col=kw.col)
            orelse = self.block()
        self.end_of_stmt()
        return ast.If(cond=cond, then=then, orelse=orelse, line=kw.line, col=kw.col)

    # ----------------------------------------------------------- expressions

    def expr(self) -> ast.Expr:
        return self.or_expr()

    def or_expr(self) -> ast.Expr:
        left = self.and_expr()
        while self.peek().kind == "||":
            op = self.advance()
            right = self.and_expr()
            left = ast.Binary(op="||", left=left, right=right, line=op.line, col=op.col)
        return left

    def and_expr(self) -> ast.Expr:
        left = self.cmp_expr()
        while self.peek().kind == "&&":
            op = self.advance()
            right = self.cmp_expr()
            left = ast.Binary(op="&&", left=left, right=right, line=op.line, col=op.col)
        return left

    def cmp_expr(self) -> ast.Expr:
        left = self.add_expr()
        if self.peek().kind in _CMP_OPS:
            op = self.advance()
            right = self.add_expr()
            return ast.Binary(op=op.kind, left=left, right=right, line=op.line, col=op.col)
        return left

    def add_expr(self) -> ast.Expr:
        left = self.mul_expr()
        while self.peek().kind in ("+", "-"):
            op = self.advance()
            right = self.mul_expr()
            left = ast.Binary(op=op.kind, left=left, right=right, line=op.line, col=op.col)
        return left

    def mul_expr(self) -> ast.Expr:
        left = self.unary_expr()
        while self.peek().kind in ("*", "/", "%"):
            op = self.advance()
            right = self.unary_expr()
            left = ast.Binary(op=op.kind, left=left, right=right, line=op.line, col=op.col)
        return left

    def unary_expr(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind in ("-", "!"):
            self.advance()
            operand = self.unary_expr()
            return ast.Unary(op=tok.kind, operand=operand, line=tok.line, col=tok.col)
        return self.primary()

    def call(self, name_tok: Token) -> ast.Call:
        self.expect("(")
        args: list[ast.Expr] = []
        if self.peek().kind != ")":
            args.append(self.expr())
            while self.match(","):
                args.append(self.expr())
        self.expect(")")
        return ast.Call(func=name_tok.text, args=args, line=name_tok.line, col=name_tok.col)

    def primary(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.advance()
            return ast.Lit(value=int(tok.text), line=tok.line, col=tok.col)
        if tok.kind == "FLOAT":
            self.advance()
            return ast.Lit(value=float(tok.text), line=tok.line, col=tok.col)
        if tok.kind in ("true", "false"):
            self.advance()
            return ast.Lit(value=tok.kind == "true", line=tok.line, col=tok.col)
        if tok.kind == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "IDENT":
            self.advance()
            if tok.text == "Motion" and self.peek().kind == ".":
                self.advance()
                port = self.expect("IDENT")
                if port.text not in ("psn", "reached"):
                    raise ParseError(f"unknown Motion port {port.text!r}", port)
                self.uses_motion = True
                return ast.PortRead(port=port.text, line=tok.line, col=tok.col)
            if self.peek().kind == "(":
                return self.call(tok)
            if self.match("["):
                idx = self.expr()
                self.expect("]")
                return ast.Index(base=tok.text, index=idx, line=tok.line, col=tok.col)
            return ast.Name(ident=tok.text, line=tok.line, col=tok.col)
        raise ParseError(f"unexpected {tok.kind!r} in expression", tok)


def parse(tokens: list[Token] | str) -> ast.Program:
    """Parse a token stream (or source text) into a Program."""
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    return _Parser(tokens).program()
