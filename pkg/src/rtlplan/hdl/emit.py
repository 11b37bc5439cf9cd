from __future__ import annotations

import hashlib
from dataclasses import fields, is_dataclass
from typing import Any, List, Optional, Tuple

from .ast import (
    AlwaysBlock, Binary, BitSelect, Block, Case, Concat, Expr, If, Literal,
    ModuleDecl, PartSelect, ProcAssign, Ref, SourceUnit, Stmt, Ternary, Unary,
)

_PREC = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5, "==": 6, "!=": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7, "<<": 8, ">>": 8, "+": 9, "-": 9, "*": 10,
}
_BITWISE = (3, 4, 5)
_RELATIONAL = (6, 7, 8)
_UNARY_PREC = 11
_PRIMARY_PREC = 12
INDENT = "    "


def format_literal(lit: Literal) -> str:
    v, w = lit.value.bits, lit.width
    if not lit.sized:
        if lit.base == "d":
            return str(v)
        return {"b": "'b" + format(v, "b"), "o": "'o" + format(v, "o"),
                "h": "'h" + format(v, "x")}[lit.base]
    if lit.base == "b":
        return f"{w}'b{v:0{w}b}"
    if lit.base == "h":
        return f"{w}'h{v:0{(w + 3) // 4}x}"
    if lit.base == "o":
        return f"{w}'o{v:o}"
    return f"{w}'d{v}"


def _expr(e: Expr) -> Tuple[str, int]:
    if isinstance(e, Literal):
        return format_literal(e), _PRIMARY_PREC
    if isinstance(e, Ref):
        return e.name, _PRIMARY_PREC
    if isinstance(e, BitSelect):
        return f"{e.name}[{emit_expr(e.index)}]", _PRIMARY_PREC
    if isinstance(e, PartSelect):
        return f"{e.name}[{e.msb}:{e.lsb}]", _PRIMARY_PREC
    if isinstance(e, Concat):
        return "{" + ", ".join(emit_expr(p) for p in e.parts) + "}", _PRIMARY_PREC
    if isinstance(e, Unary):
        text, prec = _expr(e.operand)
        if prec < _PRIMARY_PREC:
            text = f"({text})"
        return f"{e.op}{text}", _UNARY_PREC
    if isinstance(e, Binary):
        p = _PREC[e.op]
        lt, lp = _expr(e.left)
        rt, rp = _expr(e.right)
        if lp < p or (p in _BITWISE and lp in _RELATIONAL):
            lt = f"({lt})"
        if rp <= p or (p in _BITWISE and rp in _RELATIONAL):
            rt = f"({rt})"
        return f"{lt} {e.op} {rt}", p
    if isinstance(e, Ternary):
        parts = []
        for sub in (e.cond, e.then, e.other):
            t, sp = _expr(sub)
            parts.append(f"({t})" if sp == 0 else t)
        return f"{parts[0]} ? {parts[1]} : {parts[2]}", 0
    raise TypeError(f"cannot emit {type(e).__name__}")


def emit_expr(e: Expr) -> str:
    return _expr(e)[0]


def _range(msb: int, lsb: int) -> str:
    return "" if msb == 0 and lsb == 0 else f"[{msb}:{lsb}] "


def _stmt(s: Stmt, depth: int, out: List[str], lead: Optional[str] = None) -> None:
    """Append ``s``; ``lead`` replaces the indentation of the first line."""
    pad = INDENT * depth
    first = pad if lead is None else lead
    if isinstance(s, Block):
        if not s.stmts:
            out.append(f"{first}begin end")
            return
        out.append(f"{first}begin")
        for sub in s.stmts:
            _stmt(sub, depth + 1, out)
        out.append(f"{pad}end")
    elif isinstance(s, ProcAssign):
        op = "=" if s.blocking else "<="
        out.append(f"{first}{emit_expr(s.lhs)} {op} {emit_expr(s.rhs)};")
    elif isinstance(s, If):
        then = s.then
        if s.other is not None and isinstance(then, If) and then.other is None:
            then = Block((then,))
        _branch(f"{first}if ({emit_expr(s.cond)})", then, depth, out)
        if s.other is not None:
            if isinstance(s.other, If):
                _stmt(s.other, depth, out, lead=f"{pad}else ")
            else:
                _branch(f"{pad}else", s.other, depth, out)
    elif isinstance(s, Case):
        out.append(f"{first}case ({emit_expr(s.subject)})")
        for arm in s.arms:
            labels = ", ".join(emit_expr(lab) for lab in arm.labels)
            _branch(f"{pad}{INDENT}{labels}:", arm.body, depth + 1, out)
        if s.default is not None:
            _branch(f"{pad}{INDENT}default:", s.default, depth + 1, out)
        out.append(f"{pad}endcase")
    else:
        raise TypeError(f"cannot emit {type(s).__name__}")


def _branch(head: str, body: Stmt, depth: int, out: List[str]) -> None:
    if isinstance(body, Block):
        _stmt(body, depth, out, lead=head + " ")
    else:
        out.append(head)
        _stmt(body, depth + 1, out)


def _sensitivity(blk: AlwaysBlock) -> str:
    sens = blk.sensitivity
    if sens.kind == "star":
        return "@(*)"
    items = [e.signal if e.edge == "level" else f"{e.edge} {e.signal}" for e in sens.entries]
    return "@(" + " or ".join(items) + ")"


def _param_value(p) -> str:
    v = p.value
    return str(v.bits) if v.width == 32 else f"{v.width}'d{v.bits}"


def emit(m: ModuleDecl, origin: str = "<emitted>") -> SourceUnit:
    lines: List[str] = []
    header = [p for p in m.params if not p.local]
    head = f"module {m.name}"
    if header:
        head += " #(" + ", ".join(f"parameter {p.name} = {_param_value(p)}" for p in header) + ")"
    if m.ports:
        lines.append(head + " (")
        for i, p in enumerate(m.ports):
            kind = " reg" if p.is_reg else ""
            comma = "," if i < len(m.ports) - 1 else ""
            lines.append(f"{INDENT}{p.direction}{kind} {_range(p.msb, p.lsb)}{p.name}{comma}")
        lines.append(");")
    else:
        lines.append(head + " ();")
    for p in m.params:
        if p.local:
            lines.append(f"{INDENT}localparam {p.name} = {_param_value(p)};")
    for n in m.nets:
        lines.append(f"{INDENT}{n.kind} {_range(n.msb, n.lsb)}{n.name};")
    if m.assigns:
        lines.append("")
        for a in m.assigns:
            lines.append(f"{INDENT}assign {emit_expr(a.lhs)} = {emit_expr(a.rhs)};")
    for blk in m.blocks:
        lines.append("")
        _stmt(blk.body, 1, lines, lead=f"{INDENT}always {_sensitivity(blk)} ")
    lines.append("endmodule")
    return SourceUnit("\n".join(lines) + "\n", origin)


def emit_stmt(s: Stmt) -> str:
    out: List[str] = []
    _stmt(s, 0, out)
    return "\n".join(out)


def emit_node(node: Any) -> str:
    """Best-effort source snippet for any AST node (used in mutation records)."""
    if isinstance(node, (Block, If, Case, ProcAssign)):
        return emit_stmt(node)
    if isinstance(node, AlwaysBlock):
        out: List[str] = []
        _stmt(node.body, 0, out, lead=f"always {_sensitivity(node)} ")
        return "\n".join(out)
    if isinstance(node, ModuleDecl):
        return emit(node).text
    try:
        return emit_expr(node)
    except TypeError:
        return repr(node)


# -- fingerprints -----------------------------------------------------------------


def _canon(node: Any) -> Any:
    if is_dataclass(node):
        return (type(node).__name__,) + tuple(
            (f.name, _canon(getattr(node, f.name))) for f in fields(node) if f.compare
        )
    if isinstance(node, tuple):
        return tuple(_canon(x) for x in node)
    return node


def ast_fingerprint(m: ModuleDecl) -> str:
    """SHA-256 over the structural content; cosmetic fields are ignored."""
    return hashlib.sha256(repr(_canon(m)).encode()).hexdigest()
