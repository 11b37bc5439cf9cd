from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List

from .errors import HdlSyntaxError

KEYWORDS = {
    "module", "endmodule", "input", "output", "wire", "reg", "parameter",
    "localparam", "assign", "always", "posedge", "negedge", "or", "begin",
    "end", "if", "else", "case", "endcase", "default",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<number>(?:\d[\d_]*)?'[sS]?[bBdDhHoO][0-9a-fA-FxXzZ_?]+|\d[\d_]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<op><<|>>|<=|>=|==|!=|&&|\|\||[~!&|^+\-*<>=?:;,.()\[\]{}@\#])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "keyword", "number", "op", "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise HdlSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "bcomment":
            newlines = value.count("\n")
            if newlines:
                line += newlines
                line_start = pos + value.rfind("\n") + 1
        elif kind in ("ws", "lcomment"):
            pass
        elif kind == "ident":
            tokens.append(Token("keyword" if value in KEYWORDS else "ident", value, line, col))
        else:
            tokens.append(Token(kind, value, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens
