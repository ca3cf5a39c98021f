"""
Parsing - Shared lark parser for RDSL sources and integer expressions
"""

import functools
from pathlib import Path

from lark import Lark
from lark.exceptions import (
    LarkError,
    UnexpectedCharacters,
    UnexpectedEOF,
    UnexpectedInput,
    UnexpectedToken,
    VisitError,
)

from .errors import IllegalCharacter, RdslError, RdslSyntaxError, SourcePos

GRAMMAR_FILE = Path(__file__).with_name("grammar.lark")


@functools.cache
def rdsl_parser() -> Lark:
    return Lark(
        GRAMMAR_FILE.read_text(encoding="utf-8"),
        start=["unit", "equation"],
        parser="earley",
        lexer="basic",
        propagate_positions=True,
        maybe_placeholders=False,
    )


def _end_position(text: str) -> SourcePos:
    lines = text.split("\n")
    return SourcePos(len(lines), len(lines[-1]) + 1)


def translate_lark_error(exc: Exception, text: str) -> RdslError:
    """Map a lark exception to an RdslError positioned inside `text`."""
    if isinstance(exc, VisitError) and isinstance(exc.orig_exc, RdslError):
        return exc.orig_exc
    if isinstance(exc, RdslError):
        return exc
    if isinstance(exc, UnexpectedCharacters):
        char = text[exc.pos_in_stream] if 0 <= exc.pos_in_stream < len(text) else "?"
        return IllegalCharacter(char, SourcePos(exc.line, exc.column))
    if isinstance(exc, UnexpectedEOF):
        return RdslSyntaxError(_end_position(text), "end of input", exc.expected)
    if isinstance(exc, UnexpectedToken):
        token = exc.token
        found = "end of input" if token.type == "$END" else repr(str(token))
        line = getattr(token, "line", None) or exc.line
        column = getattr(token, "column", None) or exc.column
        if line is None or line < 1:
            pos = _end_position(text)
        else:
            pos = SourcePos(line, column if column and column > 0 else 1)
        return RdslSyntaxError(pos, found, exc.expected)
    if isinstance(exc, UnexpectedInput):
        line = exc.line if exc.line and exc.line > 0 else 1
        column = exc.column if exc.column and exc.column > 0 else 1
        return RdslSyntaxError(SourcePos(line, column), "input")
    if isinstance(exc, LarkError):
        return RdslSyntaxError(SourcePos(1, 1), str(exc).splitlines()[0] if str(exc) else "input")
    return RdslError(str(exc))
