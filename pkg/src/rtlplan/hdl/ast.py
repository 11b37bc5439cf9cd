"""MiniRTL syntax tree.

All nodes are frozen dataclasses so elaborated modules can be shared freely.
Fields declared with ``compare=False`` are cosmetic (source positions, literal
base) and take no part in structural equality or fingerprints.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Iterator, Optional, Tuple, Union

MAX_WIDTH = 64

UNARY_OPS = ("~", "!", "-", "&", "|", "^")
BINARY_OPS = (
    "*", "+", "-", "<<", ">>", "<", "<=", ">", ">=", "==", "!=",
    "&", "^", "|", "&&", "||",
)
COMPARISON_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGICAL_OPS = ("&&", "||")
# operators whose operands share the surrounding context width
CONTEXT_OPS = ("*", "+", "-", "&", "^", "|")


def mask(width: int) -> int:
    return (1 << width) - 1


@dataclass(frozen=True)
class BitVecValue:
    width: int
    bits: int

    def __post_init__(self):
        if not 1 <= self.width <= MAX_WIDTH:
            raise ValueError(f"width {self.width} outside 1..{MAX_WIDTH}")
        if not 0 <= self.bits <= mask(self.width):
            raise ValueError(f"value {self.bits} does not fit in {self.width} bits")

    @classmethod
    def of(cls, width: int, value: int) -> "BitVecValue":
        """Truncating constructor."""
        return cls(width, value & mask(width))

    def __int__(self) -> int:
        return self.bits

    def __str__(self) -> str:
        return f"{self.width}'d{self.bits}"


@dataclass(frozen=True)
class SourceUnit:
    text: str
    origin: str = "<string>"


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: BitVecValue
    base: str = field(default="d", compare=False)
    sized: bool = field(default=True, compare=False)

    @property
    def width(self) -> int:
        return self.value.width


@dataclass(frozen=True)
class Ref:
    name: str
    width: int = 0
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class BitSelect:
    name: str
    index: "Expr"
    width: int = 1
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class PartSelect:
    name: str
    msb: int
    lsb: int
    width: int = 0
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class Concat:
    parts: Tuple["Expr", ...]
    width: int = 0


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    width: int = 0


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    width: int = 0


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    other: "Expr"
    width: int = 0


Expr = Union[Literal, Ref, BitSelect, PartSelect, Concat, Unary, Binary, Ternary]
EXPR_TYPES = (Literal, Ref, BitSelect, PartSelect, Concat, Unary, Binary, Ternary)
LVALUE_TYPES = (Ref, BitSelect, PartSelect, Concat)

# -- statements -------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    stmts: Tuple["Stmt", ...] = ()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    other: Optional["Stmt"] = None


@dataclass(frozen=True)
class CaseArm:
    labels: Tuple[Expr, ...]
    body: "Stmt"


@dataclass(frozen=True)
class Case:
    subject: Expr
    arms: Tuple[CaseArm, ...]
    default: Optional["Stmt"] = None


@dataclass(frozen=True)
class ProcAssign:
    lhs: Expr
    rhs: Expr
    blocking: bool = True

    @property
    def kind(self) -> str:
        return "blocking" if self.blocking else "nonblocking"


Stmt = Union[Block, If, Case, ProcAssign]

# -- module level -----------------------------------------------------------


@dataclass(frozen=True)
class SensEntry:
    edge: str  # "level" | "posedge" | "negedge"
    signal: str


@dataclass(frozen=True)
class SensitivityList:
    kind: str  # "star" | "explicit"
    entries: Tuple[SensEntry, ...] = ()

    def __post_init__(self):
        if self.kind == "star" and self.entries:
            raise ValueError("star sensitivity list cannot carry entries")
        if self.kind == "explicit" and not self.entries:
            raise ValueError("explicit sensitivity list needs at least one entry")

    @property
    def is_edge(self) -> bool:
        return any(e.edge != "level" for e in self.entries)


@dataclass(frozen=True)
class AlwaysBlock:
    sensitivity: SensitivityList
    body: Stmt

    @property
    def sequential(self) -> bool:
        return self.sensitivity.is_edge


@dataclass(frozen=True)
class ContinuousAssign:
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class PortDecl:
    name: str
    direction: str  # "input" | "output"
    msb: int = 0
    lsb: int = 0
    is_reg: bool = False

    @property
    def width(self) -> int:
        return self.msb - self.lsb + 1


@dataclass(frozen=True)
class NetDecl:
    name: str
    kind: str  # "wire" | "reg"
    msb: int = 0
    lsb: int = 0

    @property
    def width(self) -> int:
        return self.msb - self.lsb + 1

    @property
    def is_reg(self) -> bool:
        return self.kind == "reg"


@dataclass(frozen=True)
class Param:
    name: str
    value: BitVecValue
    local: bool = True


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    ports: Tuple[PortDecl, ...] = ()
    params: Tuple[Param, ...] = ()
    nets: Tuple[NetDecl, ...] = ()
    assigns: Tuple[ContinuousAssign, ...] = ()
    blocks: Tuple[AlwaysBlock, ...] = ()

    @property
    def inputs(self) -> Tuple[PortDecl, ...]:
        return tuple(p for p in self.ports if p.direction == "input")

    @property
    def outputs(self) -> Tuple[PortDecl, ...]:
        return tuple(p for p in self.ports if p.direction == "output")

    def port(self, name: str) -> Optional[PortDecl]:
        for p in self.ports:
            if p.name == name:
                return p
        return None

    def signal_widths(self) -> dict:
        widths = {p.name: p.width for p in self.ports}
        widths.update((n.name, n.width) for n in self.nets)
        return widths

    def signal_lsbs(self) -> dict:
        lsbs = {p.name: p.lsb for p in self.ports}
        lsbs.update((n.name, n.lsb) for n in self.nets)
        return lsbs

    def param_values(self) -> dict:
        return {p.name: p.value for p in self.params}

    @property
    def interface(self) -> Tuple[Tuple[str, str, int], ...]:
        return tuple((p.name, p.direction, p.width) for p in self.ports)


# -- generic traversal --------------------------------------------------------

Path = Tuple[Union[str, int], ...]


def get_at(node: Any, path: Path) -> Any:
    for step in path:
        node = node[step] if isinstance(step, int) else getattr(node, step)
    return node


def replace_at(node: Any, path: Path, new: Any) -> Any:
    """Return a copy of ``node`` with the subtree at ``path`` swapped for ``new``."""
    if not path:
        return new
    step, rest = path[0], path[1:]
    if isinstance(step, int):
        items = list(node)
        items[step] = replace_at(items[step], rest, new)
        return tuple(items)
    return replace(node, **{step: replace_at(getattr(node, step), rest, new)})


def walk(node: Any, path: Path = ()) -> Iterator[Tuple[Path, Any]]:
    """Pre-order walk yielding ``(path, node)`` for every dataclass node."""
    if is_dataclass(node):
        yield path, node
        for f in fields(node):
            if not f.compare or f.name in ("width",):
                continue
            yield from walk(getattr(node, f.name), path + (f.name,))
    elif isinstance(node, tuple):
        for i, item in enumerate(node):
            yield from walk(item, path + (i,))


def refs_in(node: Any) -> Iterator[str]:
    """Names of all signals read by ``node`` (ref, bit- and part-select bases)."""
    for _, n in walk(node):
        if isinstance(n, (Ref, BitSelect, PartSelect)):
            yield n.name


def lvalue_targets(lhs: Expr) -> Tuple[str, ...]:
    if isinstance(lhs, Concat):
        out: Tuple[str, ...] = ()
        for p in lhs.parts:
            out += lvalue_targets(p)
        return out
    return (lhs.name,)


def lvalue_reads(lhs: Expr) -> Iterator[str]:
    """Signals read while evaluating an lvalue (dynamic bit indices)."""
    if isinstance(lhs, BitSelect):
        yield from refs_in(lhs.index)
    elif isinstance(lhs, Concat):
        for p in lhs.parts:
            yield from lvalue_reads(p)


def assignments(stmt: Optional[Stmt], path: Path = ()) -> Iterator[Tuple[Path, ProcAssign]]:
    for p, n in walk(stmt, path) if stmt is not None else ():
        if isinstance(n, ProcAssign):
            yield p, n


def stmt_reads(stmt: Optional[Stmt]) -> Iterator[str]:
    """Signals read by a statement tree, excluding assignment targets."""
    if stmt is None:
        return
    if isinstance(stmt, Block):
        for s in stmt.stmts:
            yield from stmt_reads(s)
    elif isinstance(stmt, If):
        yield from refs_in(stmt.cond)
        yield from stmt_reads(stmt.then)
        yield from stmt_reads(stmt.other)
    elif isinstance(stmt, Case):
        yield from refs_in(stmt.subject)
        for arm in stmt.arms:
            for lab in arm.labels:
                yield from refs_in(lab)
            yield from stmt_reads(arm.body)
        yield from stmt_reads(stmt.default)
    elif isinstance(stmt, ProcAssign):
        yield from refs_in(stmt.rhs)
        yield from lvalue_reads(stmt.lhs)
