"""Recursive-descent parser for MiniRTL (grammar in docs/minirtl.md)."""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple, Union

from .ast import (
    MAX_WIDTH, AlwaysBlock, Binary, BitSelect, BitVecValue, Block, Case, CaseArm,
    Concat, ContinuousAssign, Expr, If, Literal, ModuleDecl, NetDecl, Param,
    PartSelect, PortDecl, ProcAssign, Ref, SensEntry, SensitivityList,
    SourceUnit, Stmt, Ternary, Unary, mask,
)
from .elaborate import const_eval, elaborate
from .errors import HdlError, HdlSyntaxError
from .lexer import Token, tokenize

# binary precedence, loosest first
_LEVELS: Tuple[Tuple[str, ...], ...] = (
    ("||",), ("&&",), ("|",), ("^",), ("&",), ("==", "!="),
    ("<", "<=", ">", ">="), ("<<", ">>"), ("+", "-"), ("*",),
)
_BASES = {"b": 2, "o": 8, "d": 10, "h": 16}


def parse_literal(text: str, line: int = 0, col: int = 0) -> Literal:
    """Parse a Verilog number token (``12``, ``4'b1010``, ``'hff``)."""
    clean = text.replace("_", "")
    if "'" not in clean:
        value = int(clean)
        width = max(32, value.bit_length())
        if width > MAX_WIDTH:
            raise HdlSyntaxError(f"literal {text} exceeds {MAX_WIDTH} bits", line, col)
        return Literal(BitVecValue(width, value), "d", sized=False)
    size_text, rest = clean.split("'", 1)
    if rest[:1] in ("s", "S"):
        raise HdlSyntaxError("signed literals are not supported", line, col)
    base = rest[0].lower()
    digits = rest[1:]
    if any(ch in "xXzZ?" for ch in digits):
        raise HdlSyntaxError(f"four-state literal {text} is not supported", line, col)
    try:
        value = int(digits, _BASES[base])
    except ValueError:
        raise HdlSyntaxError(f"malformed literal {text}", line, col) from None
    sized = bool(size_text)
    width = int(size_text) if sized else 32
    if not 1 <= width <= MAX_WIDTH:
        raise HdlSyntaxError(f"literal width {width} outside 1..{MAX_WIDTH}", line, col)
    return Literal(BitVecValue(width, value & mask(width)), base, sized=sized)


class Parser:
    def __init__(self, text: str):
        self.toks: List[Token] = tokenize(text)
        self.i = 0
        self.params: Dict[str, BitVecValue] = {}

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "keyword") and self.tok.text in texts

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected '{text}'")
        return self.advance()

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error("expected identifier")
        return self.advance()

    def error(self, message: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise HdlSyntaxError(f"{message}, found {found}", t.line, t.col)

    # -- module structure
    def module(self) -> ModuleDecl:
        self.expect("module")
        name = self.ident().text
        params: List[Param] = []
        if self.accept("#"):
            self.expect("(")
            params.extend(self.param_list(local=False, closer=")"))
            self.expect(")")
        ports: List[PortDecl] = []
        self.expect("(")
        if not self.at(")"):
            ports = self.port_list()
        self.expect(")")
        self.expect(";")
        nets: List[NetDecl] = []
        assigns: List[ContinuousAssign] = []
        blocks: List[AlwaysBlock] = []
        while not self.at("endmodule"):
            if self.tok.kind == "eof":
                self.error("expected 'endmodule'")
            if self.at("wire", "reg"):
                nets_, assigns_ = self.net_decl()
                nets.extend(nets_)
                assigns.extend(assigns_)
            elif self.at("localparam", "parameter"):
                local = self.advance().text == "localparam"
                params.extend(self.param_list(local=local, closer=";"))
                self.expect(";")
            elif self.accept("assign"):
                while True:
                    lhs = self.lvalue()
                    self.expect("=")
                    assigns.append(ContinuousAssign(lhs, self.expr()))
                    if not self.accept(","):
                        break
                self.expect(";")
            elif self.accept("always"):
                blocks.append(self.always())
            else:
                self.error("expected module item")
        self.expect("endmodule")
        if self.tok.kind != "eof":
            self.error("trailing text after endmodule")
        return ModuleDecl(name, tuple(ports), tuple(params), tuple(nets),
                          tuple(assigns), tuple(blocks))

    def param_list(self, local: bool, closer: str) -> List[Param]:
        out = []
        while True:
            self.accept("parameter")
            rng = self.range_() if self.at("[") else None
            name_tok = self.ident()
            self.expect("=")
            value = self.const(self.expr())
            if rng is not None:
                value = BitVecValue.of(rng[0] - rng[1] + 1, value.bits)
            if name_tok.text in self.params:
                raise HdlError(f"'{name_tok.text}' declared more than once", name_tok.line, name_tok.col)
            self.params[name_tok.text] = value
            out.append(Param(name_tok.text, value, local))
            if not self.accept(","):
                return out

    def port_list(self) -> List[PortDecl]:
        ports = []
        direction: Optional[str] = None
        is_reg = False
        rng = (0, 0)
        while True:
            if self.at("input", "output"):
                direction = self.advance().text
                is_reg = False
                if self.at("wire", "reg"):
                    is_reg = self.advance().text == "reg"
                rng = self.range_() if self.at("[") else (0, 0)
            elif direction is None:
                self.error("expected port direction")
            name = self.ident().text
            ports.append(PortDecl(name, direction, rng[0], rng[1], is_reg))
            if not self.accept(","):
                return ports

    def net_decl(self):
        kind = self.advance().text
        rng = self.range_() if self.at("[") else (0, 0)
        nets, assigns = [], []
        while True:
            t = self.ident()
            nets.append(NetDecl(t.text, kind, rng[0], rng[1]))
            if self.accept("="):
                if kind == "reg":
                    raise HdlSyntaxError("reg initializers are not supported (regs start at zero)",
                                         t.line, t.col)
                assigns.append(ContinuousAssign(Ref(t.text, pos=(t.line, t.col)), self.expr()))
            if not self.accept(","):
                break
        self.expect(";")
        return nets, assigns

    def range_(self) -> Tuple[int, int]:
        self.expect("[")
        msb = self.const(self.expr()).bits
        self.expect(":")
        lsb = self.const(self.expr()).bits
        self.expect("]")
        return msb, lsb

    def const(self, e: Expr) -> BitVecValue:
        return const_eval(e, self.params)

    def always(self) -> AlwaysBlock:
        self.expect("@")
        if self.accept("*"):
            sens = SensitivityList("star")
        else:
            self.expect("(")
            if self.accept("*"):
                sens = SensitivityList("star")
            else:
                entries = []
                while True:
                    edge = "level"
                    if self.at("posedge", "negedge"):
                        edge = self.advance().text
                    entries.append(SensEntry(edge, self.ident().text))
                    if not (self.accept("or") or self.accept(",")):
                        break
                sens = SensitivityList("explicit", tuple(entries))
            self.expect(")")
        return AlwaysBlock(sens, self.stmt())

    # -- statements
    def stmt(self) -> Stmt:
        if self.accept("begin"):
            if self.accept(":"):
                self.ident()
            stmts = []
            while not self.accept("end"):
                if self.tok.kind == "eof":
                    self.error("expected 'end'")
                stmts.append(self.stmt())
            return Block(tuple(stmts))
        if self.accept(";"):
            return Block(())
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.stmt()
            other = self.stmt() if self.accept("else") else None
            return If(cond, then, other)
        if self.accept("case"):
            self.expect("(")
            subject = self.expr()
            self.expect(")")
            arms: List[CaseArm] = []
            default = None
            while not self.accept("endcase"):
                if self.tok.kind == "eof":
                    self.error("expected 'endcase'")
                if self.accept("default"):
                    self.accept(":")
                    if default is not None:
                        self.error("duplicate default arm")
                    default = self.stmt()
                    continue
                labels = [self.expr()]
                while self.accept(","):
                    labels.append(self.expr())
                self.expect(":")
                arms.append(CaseArm(tuple(labels), self.stmt()))
            return Case(subject, tuple(arms), default)
        lhs = self.lvalue()
        if self.accept("="):
            blocking = True
        elif self.accept("<="):
            blocking = False
        else:
            self.error("expected '=' or '<='")
        rhs = self.expr()
        self.expect(";")
        return ProcAssign(lhs, rhs, blocking)

    def lvalue(self) -> Expr:
        if self.accept("{"):
            parts = [self.lvalue()]
            while self.accept(","):
                parts.append(self.lvalue())
            self.expect("}")
            return Concat(tuple(parts))
        return self.selectable(self.ident())

    # -- expressions
    def expr(self) -> Expr:
        cond = self.binary(0)
        if self.accept("?"):
            then = self.expr()
            self.expect(":")
            return Ternary(cond, then, self.expr())
        return cond

    def binary(self, level: int) -> Expr:
        if level == len(_LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        ops = _LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.advance().text
            left = Binary(op, left, self.binary(level + 1))
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text in ("~", "!", "-", "&", "|", "^", "+"):
            op = self.advance().text
            operand = self.unary()
            return operand if op == "+" else Unary(op, operand)
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            return parse_literal(t.text, t.line, t.col)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("{"):
            parts = [self.expr()]
            while self.accept(","):
                parts.append(self.expr())
            self.expect("}")
            return Concat(tuple(parts))
        if t.kind == "ident":
            self.advance()
            return self.selectable(t)
        self.error("expected expression")

    def selectable(self, t: Token) -> Expr:
        pos = (t.line, t.col)
        if not self.accept("["):
            return Ref(t.text, pos=pos)
        first = self.expr()
        if self.accept(":"):
            msb = self.const(first).bits
            lsb = self.const(self.expr()).bits
            self.expect("]")
            return PartSelect(t.text, msb, lsb, pos=pos)
        self.expect("]")
        return BitSelect(t.text, first, pos=pos)


def parse_raw(text: str) -> ModuleDecl:
    """Parse without elaboration (widths left at zero)."""
    return Parser(text).module()


def parse(source: Union[SourceUnit, str]) -> ModuleDecl:
    text = source.text if isinstance(source, SourceUnit) else source
    return elaborate(parse_raw(text))
