"""Frontend for the coordination language: lexer, parser, checker, lowering."""

from koordsim.lang.lexer import LexError, Token, tokenize
from koordsim.lang.parser import ParseError, parse
from koordsim.lang.checker import CheckedProgram, Diagnostic, check
from koordsim.lang.lower import EventTable, LoweredEvent, lower
from koordsim.lang.pretty import pretty

__all__ = [
    "LexError",
    "Token",
    "tokenize",
    "ParseError",
    "parse",
    "CheckedProgram",
    "Diagnostic",
    "check",
    "EventTable",
    "LoweredEvent",
    "lower",
    "pretty",
]
