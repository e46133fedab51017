"""Tokenizer for .koord sources.

Newlines are significant (statements are newline-terminated), so they are
emitted as NEWLINE tokens.  Comments run from ``#`` to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = {
    "allwrite",
    "allread",
    "local",
    "event",
    "atomic",
    "pre",
    "eff",
    "if",
    "else",
    "true",
    "false",
    "int",
    "float",
    "bool",
    "pos",
    "poslist",
}

# longest match first
_TWO_CHAR_OPS = ("==", "!=", "<=", ">=", "&&", "||")
_ONE_CHAR_OPS = "=<>+-*/%!()[]{},:."


@dataclass(frozen=True)
class Token:
    kind: str  # keyword text, operator text, or IDENT/INT/FLOAT/NEWLINE/EOF
    text: str
    line: int
    col: int

    def __repr__(self) -> str:  # compact for test failure messages
        return f"{self.kind}@{self.line}:{self.col}"


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


def tokenize(source: str) -> list[Token]:
    """Tokenize a source string; raises LexError on unrecognized characters."""
    tokens: list[Token] = []
    line = 1
    col = 1
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c == "\n":
            # collapse runs of blank lines into a single NEWLINE
            if tokens and tokens[-1].kind != "NEWLINE":
                tokens.append(Token("NEWLINE", "\n", line, col))
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            kind = word if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            is_float = False
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == ".":
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            tokens.append(Token("FLOAT" if is_float else "INT", text, line, col))
            col += j - i
            i = j
            continue
        two = source[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(two, two, line, col))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR_OPS:
            tokens.append(Token(c, c, line, col))
            i += 1
            col += 1
            continue
        raise LexError(f"unrecognized character {c!r}", line, col)
    if tokens and tokens[-1].kind != "NEWLINE":
        tokens.append(Token("NEWLINE", "\n", line, col))
    tokens.append(Token("EOF", "", line, col))
    return tokens
