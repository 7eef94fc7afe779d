"""Minimal S-expression reader/printer shared by the spec parser and the
solver-model parser.

Atoms are returned as :class:`Symbol` (a ``str`` subclass carrying its source
position), ``int`` or :class:`String`.  Lists are Python lists with a
``pos`` attribute attached via :class:`SList`.
"""

from __future__ import annotations

import re

__all__ = ["Symbol", "String", "SList", "SExprError", "parse", "parse_one", "dumps"]


class SExprError(ValueError):
    def __init__(self, msg, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            msg = f"{line}:{col}: {msg}"
        super().__init__(msg)


class Symbol(str):
    line = 0
    col = 0

    def __repr__(self):
        return f"Symbol({str(self)!r})"


class String(str):
    line = 0
    col = 0


class SList(list):
    line = 0
    col = 0


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>;[^\n]*)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<string>"(?:[^"]|"")*")
  | (?P<quoted>\|[^|]*\|)
  | (?P<atom>[^\s()";|]+)
    """,
    re.VERBOSE,
)
_INT = re.compile(r"-?\d+\Z")


def _tokens(text):
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SExprError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind not in ("ws", "comment"):
            yield kind, m.group(), line, col
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()


def parse(text):
    """Parse every top-level expression in ``text``."""
    stack = [SList()]
    for kind, tok, line, col in _tokens(text):
        if kind == "lpar":
            lst = SList()
            lst.line, lst.col = line, col
            stack.append(lst)
        elif kind == "rpar":
            if len(stack) == 1:
                raise SExprError("unbalanced ')'", line, col)
            done = stack.pop()
            stack[-1].append(done)
        elif kind == "string":
            s = String(tok[1:-1].replace('""', '"'))
            s.line, s.col = line, col
            stack[-1].append(s)
        else:
            if kind == "quoted":
                tok = tok[1:-1]
            if kind == "atom" and _INT.match(tok):
                stack[-1].append(int(tok))
            else:
                s = Symbol(tok)
                s.line, s.col = line, col
                stack[-1].append(s)
    if len(stack) != 1:
        opened = stack[-1]
        raise SExprError("unclosed '('", opened.line, opened.col)
    return list(stack[0])


def parse_one(text):
    items = parse(text)
    if len(items) != 1:
        raise SExprError(f"expected one expression, found {len(items)}")
    return items[0]


def where(x):
    """``(line, col)`` of a parsed node, or ``(None, None)``."""
    return getattr(x, "line", None) or None, getattr(x, "col", None) or None


def dumps(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x) if x >= 0 else f"(- {-x})"
    if isinstance(x, String):
        return '"' + str(x).replace('"', '""') + '"'
    if isinstance(x, str):
        return str(x)
    return "(" + " ".join(dumps(y) for y in x) + ")"
