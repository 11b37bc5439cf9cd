"""AST traversal helpers and provenance records shared by mutations and transforms."""

from __future__ import annotations

import random
from dataclasses import dataclass, fields, is_dataclass, replace
from typing import Any, Callable, Dict, Iterator, Optional, Tuple

from ..hdl.ast import Binary, Block, Case, Expr, If, ModuleDecl, Path, ProcAssign, Ref, Stmt, walk
from ..hdl.elaborate import elaborate
from ..hdl.emit import ast_fingerprint, emit_node
from ..hdl.errors import HdlError


class MutationError(ValueError):
    """A rewrite could not be applied (illegal site, no-op, or invalid result)."""


def rng_for(seed: int, purpose: str) -> random.Random:
    # string seeds hash deterministically (sha512), independent of PYTHONHASHSEED
    return random.Random(f"{seed}/{purpose}")


# -- traversal ----------------------------------------------------------------------


def stmt_expr_roots(s: Optional[Stmt], path: Path) -> Iterator[Tuple[Path, Expr]]:
    """Expression roots read by a statement tree (conditions, subjects, right-hand sides)."""
    if s is None:
        return
    if isinstance(s, Block):
        for j, sub in enumerate(s.stmts):
            yield from stmt_expr_roots(sub, path + ("stmts", j))
    elif isinstance(s, If):
        yield path + ("cond",), s.cond
        yield from stmt_expr_roots(s.then, path + ("then",))
        yield from stmt_expr_roots(s.other, path + ("other",))
    elif isinstance(s, Case):
        yield path + ("subject",), s.subject
        for k, arm in enumerate(s.arms):
            yield from stmt_expr_roots(arm.body, path + ("arms", k, "body"))
        yield from stmt_expr_roots(s.default, path + ("default",))
    elif isinstance(s, ProcAssign):
        yield path + ("rhs",), s.rhs


def rvalue_roots(m: ModuleDecl) -> Iterator[Tuple[Path, Expr]]:
    for i, a in enumerate(m.assigns):
        yield ("assigns", i, "rhs"), a.rhs
    for i, b in enumerate(m.blocks):
        yield from stmt_expr_roots(b.body, ("blocks", i, "body"))


def rvalue_nodes(m: ModuleDecl) -> Iterator[Tuple[Path, Any]]:
    """Every expression node in a read position, paired with its path."""
    for root_path, root in rvalue_roots(m):
        yield from walk(root, root_path)


def statements(m: ModuleDecl) -> Iterator[Tuple[Path, Stmt, int]]:
    """Every procedural statement, pre-order, with the index of its always block."""
    for i, b in enumerate(m.blocks):
        for p, n in walk(b.body, ("blocks", i, "body")):
            if isinstance(n, (Block, If, Case, ProcAssign)):
                yield p, n, i


def declared_ranges(m: ModuleDecl) -> Dict[str, Tuple[int, int]]:
    ranges = {p.name: (p.msb, p.lsb) for p in m.ports}
    ranges.update((n.name, (n.msb, n.lsb)) for n in m.nets)
    return ranges


def signal_refs(e: Any, m: ModuleDecl) -> Iterator[Tuple[Path, Ref]]:
    """Ref nodes naming signals (not parameters) under ``e``."""
    params = {p.name for p in m.params}
    for p, n in walk(e):
        if isinstance(n, Ref) and n.name not in params:
            yield p, n


def ordered_unique(items) -> list:
    seen = set()
    out = []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


def transform(node: Any, fn: Callable[[Any], Any]) -> Any:
    """Rebuild ``node`` bottom-up, passing every dataclass node through ``fn``."""
    if is_dataclass(node) and not isinstance(node, type):
        changes = {}
        for f in fields(node):
            old = getattr(node, f.name)
            new = transform(old, fn)
            if new is not old:
                changes[f.name] = new
        if changes:
            node = replace(node, **changes)
        return fn(node)
    if isinstance(node, tuple):
        items = tuple(transform(x, fn) for x in node)
        return items if any(a is not b for a, b in zip(items, node)) else node
    return node


def contains_op(e: Any, op: str) -> bool:
    return any(isinstance(n, Binary) and n.op == op for _, n in walk(e))


def finish(m: ModuleDecl) -> ModuleDecl:
    """Re-elaborate a rewritten module, turning elaboration errors into MutationError."""
    try:
        return elaborate(m)
    except HdlError as exc:
        raise MutationError(f"rewrite does not elaborate: {exc}") from exc


# -- provenance -------------------------------------------------------------------


@dataclass(frozen=True)
class MutationRecord:
    operator: Any  # MutationOperator | EquivalenceTransform
    site: Path
    before: str
    after: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "operator": self.operator.to_dict(),
            "site": list(self.site),
            "before": self.before,
            "after": self.after,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MutationRecord":
        from .equivalence import EquivalenceTransform
        from .operators import MutationOperator

        op = d["operator"]
        kind = MutationOperator if op.get("kind", "mutation") == "mutation" else EquivalenceTransform
        return cls(kind.from_dict(op), tuple(d["site"]), d["before"], d["after"], int(d["seed"]))


def snippet(node: Any) -> str:
    return emit_node(node) if node is not None else ""


def changed(parent: ModuleDecl, child: ModuleDecl) -> bool:
    return ast_fingerprint(parent) != ast_fingerprint(child)


__all__ = [
    "MutationError", "MutationRecord", "changed", "contains_op", "declared_ranges",
    "finish", "ordered_unique", "rng_for", "rvalue_nodes", "rvalue_roots",
    "signal_refs", "snippet", "statements", "stmt_expr_roots", "transform",
]
