"""Name resolution, width inference and static checks.

Width rules follow two-state Verilog: every expression has a self-determined
width; arithmetic and bitwise operands are zero-extended to the surrounding
context width; comparisons, logical operators and reductions yield one bit;
assignment truncates to the target width.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Callable, Dict, Mapping, Optional, Tuple

from .ast import (
    MAX_WIDTH, AlwaysBlock, Binary, BitSelect, BitVecValue, Block, Case, CaseArm,
    Concat, ContinuousAssign, Expr, If, Literal, ModuleDecl, PartSelect,
    ProcAssign, Ref, Stmt, Ternary, Unary, lvalue_targets, mask,
)
from .errors import (
    DriverKindError, HdlError, MultipleDriversError, UnresolvedIdentifierError,
    WidthError,
)


def _pos(e) -> Tuple[int, int]:
    return getattr(e, "pos", None) or (0, 0)


# -- constant evaluation ------------------------------------------------------


def const_eval(e: Expr, params: Mapping[str, BitVecValue]) -> BitVecValue:
    """Evaluate a constant expression whose identifiers are all parameters."""
    width = _const_width(e, params)
    return BitVecValue(width, _const_value(e, width, params))


def _const_width(e: Expr, params) -> int:
    if isinstance(e, Literal):
        return e.width
    if isinstance(e, Ref):
        if e.name not in params:
            raise UnresolvedIdentifierError(f"'{e.name}' is not a constant", *_pos(e))
        return params[e.name].width
    if isinstance(e, Unary):
        return 1 if e.op in ("!", "&", "|", "^") else _const_width(e.operand, params)
    if isinstance(e, Binary):
        if e.op in ("<", "<=", ">", ">=", "==", "!=", "&&", "||"):
            return 1
        if e.op in ("<<", ">>"):
            return _const_width(e.left, params)
        return max(_const_width(e.left, params), _const_width(e.right, params))
    if isinstance(e, Ternary):
        return max(_const_width(e.then, params), _const_width(e.other, params))
    if isinstance(e, Concat):
        return sum(_const_width(p, params) for p in e.parts)
    raise HdlError(f"{type(e).__name__} is not allowed in a constant expression", *_pos(e))


def _const_value(e: Expr, ctx: int, params) -> int:
    m = mask(ctx)
    if isinstance(e, Literal):
        return e.value.bits & m
    if isinstance(e, Ref):
        return params[e.name].bits & m
    if isinstance(e, Unary):
        if e.op == "~":
            return ~_const_value(e.operand, ctx, params) & m
        if e.op == "-":
            return -_const_value(e.operand, ctx, params) & m
        w = _const_width(e.operand, params)
        v = _const_value(e.operand, w, params)
        if e.op == "!":
            return int(v == 0)
        if e.op == "&":
            return int(v == mask(w))
        if e.op == "|":
            return int(v != 0)
        return bin(v).count("1") & 1
    if isinstance(e, Binary):
        op = e.op
        if op in ("&&", "||"):
            a = _const_value(e.left, _const_width(e.left, params), params) != 0
            b = _const_value(e.right, _const_width(e.right, params), params) != 0
            return int(a and b) if op == "&&" else int(a or b)
        if op in ("<", "<=", ">", ">=", "==", "!="):
            w = max(_const_width(e.left, params), _const_width(e.right, params))
            a, b = _const_value(e.left, w, params), _const_value(e.right, w, params)
            return int({"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
                        "==": a == b, "!=": a != b}[op])
        if op in ("<<", ">>"):
            a = _const_value(e.left, ctx, params)
            sh = _const_value(e.right, _const_width(e.right, params), params)
            return (a << sh) & m if op == "<<" else a >> sh
        a, b = _const_value(e.left, ctx, params), _const_value(e.right, ctx, params)
        return {"+": a + b, "-": a - b, "*": a * b, "&": a & b, "|": a | b, "^": a ^ b}[op] & m
    if isinstance(e, Ternary):
        c = _const_value(e.cond, _const_width(e.cond, params), params)
        return _const_value(e.then if c else e.other, ctx, params)
    if isinstance(e, Concat):
        v = 0
        for p in e.parts:
            w = _const_width(p, params)
            v = (v << w) | _const_value(p, w, params)
        return v & m
    raise HdlError(f"{type(e).__name__} is not allowed in a constant expression", *_pos(e))


def is_constant(e: Expr, params: Mapping[str, BitVecValue]) -> bool:
    try:
        _const_width(e, params)
    except HdlError:
        return False
    return True


# -- elaboration ----------------------------------------------------------------


class _Scope:
    def __init__(self, m: ModuleDecl):
        self.widths: Dict[str, int] = {}
        self.ranges: Dict[str, Tuple[int, int]] = {}
        self.regs: Dict[str, bool] = {}
        self.inputs = set()
        self.params: Dict[str, BitVecValue] = {}
        for p in m.params:
            self._declare(p.name)
            self.params[p.name] = p.value
        for p in m.ports:
            self._declare(p.name)
            self._range(p.name, p.msb, p.lsb)
            self.regs[p.name] = p.is_reg
            if p.direction == "input":
                if p.is_reg:
                    raise DriverKindError(f"input '{p.name}' cannot be a reg")
                self.inputs.add(p.name)
        for n in m.nets:
            self._declare(n.name)
            self._range(n.name, n.msb, n.lsb)
            self.regs[n.name] = n.is_reg

    def _declare(self, name: str) -> None:
        if name in self.widths or name in self.params:
            raise HdlError(f"'{name}' declared more than once")
        self.widths[name] = 0

    def _range(self, name: str, msb: int, lsb: int) -> None:
        if lsb < 0 or msb < lsb:
            raise WidthError(f"'{name}': range [{msb}:{lsb}] must be descending and non-negative")
        if msb - lsb + 1 > MAX_WIDTH:
            raise WidthError(f"'{name}': width {msb - lsb + 1} exceeds {MAX_WIDTH} bits")
        self.widths[name] = msb - lsb + 1
        self.ranges[name] = (msb, lsb)

    def signal(self, name: str, node) -> int:
        if name not in self.ranges:
            if name in self.params:
                raise WidthError(f"parameter '{name}' cannot be selected or assigned", *_pos(node))
            raise UnresolvedIdentifierError(f"unresolved identifier '{name}'", *_pos(node))
        return self.widths[name]


def elaborate(m: ModuleDecl) -> ModuleDecl:
    """Check ``m`` and return a copy whose expression nodes carry widths."""
    scope = _Scope(m)
    drivers: Dict[str, str] = {}

    def claim(names, who: str, node) -> None:
        for name in names:
            prev = drivers.get(name)
            if prev is not None and prev != who:
                raise MultipleDriversError(
                    f"'{name}' is driven by both {prev} and {who}", *_pos(node))
            drivers[name] = who

    assigns = []
    for i, ca in enumerate(m.assigns):
        lhs = _lvalue(ca.lhs, scope, want_reg=False)
        claim(lvalue_targets(lhs), f"assign #{i}", ca.lhs)
        assigns.append(ContinuousAssign(lhs, _expr(ca.rhs, scope)))

    blocks = []
    for i, blk in enumerate(m.blocks):
        for entry in blk.sensitivity.entries:
            if entry.signal not in scope.ranges:
                raise UnresolvedIdentifierError(
                    f"unresolved identifier '{entry.signal}' in sensitivity list")
        who = f"always #{i}"
        body = _stmt(blk.body, scope, lambda names, node: claim(names, who, node))
        blocks.append(AlwaysBlock(blk.sensitivity, body))

    return replace(m, assigns=tuple(assigns), blocks=tuple(blocks))


def _lvalue(e: Expr, scope: _Scope, want_reg: bool) -> Expr:
    if isinstance(e, Concat):
        parts = tuple(_lvalue(p, scope, want_reg) for p in e.parts)
        return _concat(parts)
    if not isinstance(e, (Ref, BitSelect, PartSelect)):
        raise HdlError(f"{type(e).__name__} is not a valid assignment target")
    scope.signal(e.name, e)
    if e.name in scope.inputs:
        raise DriverKindError(f"input '{e.name}' cannot be assigned", *_pos(e))
    if scope.regs[e.name] != want_reg:
        what = "procedural assignment needs a reg" if want_reg else "continuous assignment needs a wire"
        raise DriverKindError(f"{what}: '{e.name}'", *_pos(e))
    return _expr(e, scope)


def _concat(parts) -> Concat:
    width = sum(p.width for p in parts)
    if width > MAX_WIDTH:
        raise WidthError(f"concatenation of {width} bits exceeds {MAX_WIDTH}")
    return Concat(parts, width)


def _expr(e: Expr, scope: _Scope) -> Expr:
    if isinstance(e, Literal):
        return e
    if isinstance(e, Ref):
        if e.name in scope.params:
            return replace(e, width=scope.params[e.name].width)
        return replace(e, width=scope.signal(e.name, e))
    if isinstance(e, BitSelect):
        scope.signal(e.name, e)
        index = _expr(e.index, scope)
        if is_constant(index, scope.params):
            idx = const_eval(index, scope.params).bits
            msb, lsb = scope.ranges[e.name]
            if not lsb <= idx <= msb:
                raise WidthError(f"bit select {e.name}[{idx}] outside [{msb}:{lsb}]", *_pos(e))
        return replace(e, index=index, width=1)
    if isinstance(e, PartSelect):
        scope.signal(e.name, e)
        msb, lsb = scope.ranges[e.name]
        if e.msb < e.lsb or e.lsb < lsb or e.msb > msb:
            raise WidthError(
                f"part select {e.name}[{e.msb}:{e.lsb}] outside [{msb}:{lsb}]", *_pos(e))
        return replace(e, width=e.msb - e.lsb + 1)
    if isinstance(e, Concat):
        return _concat(tuple(_expr(p, scope) for p in e.parts))
    if isinstance(e, Unary):
        x = _expr(e.operand, scope)
        return Unary(e.op, x, x.width if e.op in ("~", "-") else 1)
    if isinstance(e, Binary):
        a, b = _expr(e.left, scope), _expr(e.right, scope)
        if e.op in ("<", "<=", ">", ">=", "==", "!=", "&&", "||"):
            w = 1
        elif e.op in ("<<", ">>"):
            w = a.width
        else:
            w = max(a.width, b.width)
        return Binary(e.op, a, b, w)
    if isinstance(e, Ternary):
        c, t, o = _expr(e.cond, scope), _expr(e.then, scope), _expr(e.other, scope)
        return Ternary(c, t, o, max(t.width, o.width))
    raise HdlError(f"unknown expression node {type(e).__name__}")


def _stmt(s: Optional[Stmt], scope: _Scope, claim: Callable) -> Optional[Stmt]:
    if s is None:
        return None
    if isinstance(s, Block):
        return Block(tuple(_stmt(x, scope, claim) for x in s.stmts))
    if isinstance(s, If):
        return If(_expr(s.cond, scope), _stmt(s.then, scope, claim), _stmt(s.other, scope, claim))
    if isinstance(s, Case):
        arms = tuple(
            CaseArm(tuple(_expr(lab, scope) for lab in arm.labels), _stmt(arm.body, scope, claim))
            for arm in s.arms
        )
        return Case(_expr(s.subject, scope), arms, _stmt(s.default, scope, claim))
    if isinstance(s, ProcAssign):
        lhs = _lvalue(s.lhs, scope, want_reg=True)
        claim(lvalue_targets(lhs), s.lhs)
        return ProcAssign(lhs, _expr(s.rhs, scope), s.blocking)
    raise HdlError(f"unknown statement node {type(s).__name__}")


def assignment_context(lhs: Expr, rhs: Expr) -> int:
    return max(lhs.width, rhs.width)
