"""MiniRTL front end: parsing, elaboration, emission, fingerprints."""

from .ast import (
    AlwaysBlock, Binary, BitSelect, BitVecValue, Block, Case, CaseArm, Concat,
    ContinuousAssign, If, Literal, ModuleDecl, NetDecl, Param, PartSelect,
    PortDecl, ProcAssign, Ref, SensEntry, SensitivityList, SourceUnit, Ternary,
    Unary,
)
from .conventions import ClockReset, infer_clock_reset
from .elaborate import elaborate
from .emit import ast_fingerprint, emit, emit_expr, emit_node
from .errors import (
    Diagnostic, DriverKindError, HdlError, HdlSyntaxError, MultipleDriversError,
    UnresolvedIdentifierError, WidthError,
)
from .parser import parse, parse_literal


def load(path) -> ModuleDecl:
    """Parse a MiniRTL file from disk."""
    with open(path, encoding="utf-8") as f:
        return parse(SourceUnit(f.read(), str(path)))


def classify(m: ModuleDecl) -> str:
    return "sequential" if any(b.sequential for b in m.blocks) else "combinational"
