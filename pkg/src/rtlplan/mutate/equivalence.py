"""Semantics-preserving rewrites, grouped into five categories.

Every rewrite here is intended to be exact under two-state, context-width
semantics, but callers still confirm each result with the validator.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Set, Tuple

from ..hdl.ast import (
    AlwaysBlock, Binary, BitSelect, BitVecValue, Block, Case, CaseArm, Concat,
    ContinuousAssign, If, Literal, ModuleDecl, NetDecl, PartSelect, Path,
    ProcAssign, Ref, SensEntry, SensitivityList, Ternary, Unary, get_at,
    lvalue_targets, replace_at, stmt_reads, walk,
)
from .common import (
    MutationError, MutationRecord, changed, contains_op, finish, ordered_unique,
    rng_for, rvalue_nodes, snippet, statements, transform,
)

EQUIV_CATEGORIES = ("stylistic", "architectural", "implementation", "optimization", "structural")

SiteFn = Callable[[ModuleDecl], List[Path]]
RewriteFn = Callable[[ModuleDecl, Path, object, int], ModuleDecl]


@dataclass(frozen=True)
class EquivalenceTransform:
    category: str
    variant: Optional[str] = None

    def __post_init__(self):
        if self.category not in EQUIV_CATEGORIES:
            raise ValueError(f"unknown equivalence category '{self.category}'")
        if self.variant is not None and self.variant not in TRANSFORMS[self.category]:
            raise ValueError(f"'{self.variant}' is not a variant of {self.category}")

    @property
    def name(self) -> str:
        return self.category if self.variant is None else f"{self.category}:{self.variant}"

    def to_dict(self) -> dict:
        return {"kind": "equivalence", "category": self.category, "variant": self.variant}

    @classmethod
    def from_dict(cls, d: dict) -> "EquivalenceTransform":
        return cls(d["category"], d.get("variant"))

    @classmethod
    def parse(cls, text: str) -> "EquivalenceTransform":
        cat, _, var = text.partition(":")
        return cls(cat, var or None)


def _regs(m: ModuleDecl) -> Set[str]:
    return {n.name for n in m.nets if n.is_reg} | {p.name for p in m.ports if p.is_reg}


def _set_kind(m: ModuleDecl, name: str, reg: bool) -> ModuleDecl:
    """Flip a signal between wire and reg storage."""
    nets = tuple(replace(n, kind="reg" if reg else "wire") if n.name == name else n for n in m.nets)
    ports = tuple(replace(p, is_reg=reg) if p.name == name else p for p in m.ports)
    return replace(m, nets=nets, ports=ports)


def _fresh(m: ModuleDecl, base: str) -> str:
    taken = {p.name for p in m.ports} | {n.name for n in m.nets} | {p.name for p in m.params}
    k = 1
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


def _shift_hazard(leaves, lhs_width: int) -> bool:
    """Moving expressions into a shared context is only unsafe across a right shift."""
    return any(contains_op(e, ">>") for e in leaves) and any(e.width > lhs_width for e in leaves)


# -- stylistic ---------------------------------------------------------------------


def _rename_sites(m):
    return [("nets",)] if m.nets else []


def _rename_nets(m, site, rng, seed):
    suffix = f"_r{seed % 9 + 1}"
    mapping = {n.name: n.name + suffix for n in m.nets}
    taken = {p.name for p in m.ports} | {p.name for p in m.params}
    if set(mapping.values()) & taken:
        raise MutationError("renamed net would collide with an existing name")

    def fn(node):
        if isinstance(node, (Ref, BitSelect, PartSelect, NetDecl)) and node.name in mapping:
            return replace(node, name=mapping[node.name])
        if isinstance(node, SensEntry) and node.signal in mapping:
            return replace(node, signal=mapping[node.signal])
        return node

    return transform(m, fn)


def _reorder_sites(m):
    return [("assigns",)] if len(m.assigns) >= 2 else []


def _reorder_assigns(m, site, rng, seed):
    order = list(range(len(m.assigns)))
    while order == sorted(order):
        rng.shuffle(order)
    return replace(m, assigns=tuple(m.assigns[i] for i in order))


# -- architectural -----------------------------------------------------------------


def _assign_to_always_sites(m):
    return [("assigns", i) for i, a in enumerate(m.assigns) if isinstance(a.lhs, Ref)]


def _assign_to_always(m, site, rng, seed):
    a = get_at(m, site)
    name = a.lhs.name
    m = _set_kind(m, name, reg=True)
    blk = AlwaysBlock(SensitivityList("star"), ProcAssign(Ref(name), a.rhs, blocking=True))
    assigns = m.assigns[:site[1]] + m.assigns[site[1] + 1:]
    return replace(m, assigns=assigns, blocks=m.blocks + (blk,))


def _as_expr(s, target: Optional[str]):
    """Fold a combinational body that assigns one target on every path into an expression.

    Returns ``(target, expr, leaves)`` or ``None``.
    """
    while isinstance(s, Block) and len(s.stmts) == 1:
        s = s.stmts[0]
    if isinstance(s, ProcAssign) and s.blocking and isinstance(s.lhs, Ref):
        if target is not None and s.lhs.name != target:
            return None
        return s.lhs.name, s.rhs, [s.rhs]
    if isinstance(s, If) and s.other is not None:
        t = _as_expr(s.then, target)
        if t is None:
            return None
        o = _as_expr(s.other, t[0])
        if o is None:
            return None
        return t[0], Ternary(s.cond, t[1], o[1]), t[2] + o[2]
    return None


def _always_to_assign_sites(m):
    out = []
    widths = m.signal_widths()
    params = {p.name for p in m.params}
    for i, b in enumerate(m.blocks):
        if b.sequential:
            continue
        folded = _as_expr(b.body, None)
        if folded is None:
            continue
        target, _, leaves = folded
        reads = {n for n in stmt_reads(b.body) if n not in params}
        if target in reads:
            continue
        if b.sensitivity.kind == "explicit" and not reads <= {e.signal for e in b.sensitivity.entries}:
            continue
        if _shift_hazard(leaves, widths[target]):
            continue
        out.append(("blocks", i))
    return out


def _always_to_assign(m, site, rng, seed):
    target, expr, _ = _as_expr(get_at(m, site).body, None)
    m = _set_kind(m, target, reg=False)
    blocks = m.blocks[:site[1]] + m.blocks[site[1] + 1:]
    return replace(m, blocks=blocks, assigns=m.assigns + (ContinuousAssign(Ref(target), expr),))


class _Fsm:
    """A state register whose encoding is only observable through named constants."""

    def __init__(self, m: ModuleDecl, state: str, consts: Set[str]):
        self.m = m
        self.consts = consts
        self.vars = {state}
        for _, s, _ in statements(m):
            if isinstance(s, ProcAssign) and isinstance(s.lhs, Ref) and s.lhs.name == state \
                    and isinstance(s.rhs, Ref) and s.rhs.name in _regs(m):
                self.vars.add(s.rhs.name)

    def _value(self, e) -> bool:
        if isinstance(e, Ref):
            return e.name in self.consts or e.name in self.vars
        if isinstance(e, Ternary):
            return self._clean(e.cond) and self._value(e.then) and self._value(e.other)
        return False

    def _clean(self, e) -> bool:
        """No state name appears except in ``var ==/!= CONST`` tests."""
        if isinstance(e, Binary) and e.op in ("==", "!="):
            pair = {type(e.left), type(e.right)} == {Ref}
            if pair:
                names = {e.left.name, e.right.name}
                if names & self.vars and names & self.consts:
                    return len(names & self.vars) == 1 and len(names & self.consts) == 1
        if isinstance(e, (Ref, BitSelect, PartSelect)) and (e.name in self.vars or e.name in self.consts):
            return False
        if isinstance(e, BitSelect):
            return self._clean(e.index)
        for sub in _children(e):
            if not self._clean(sub):
                return False
        return True

    def _stmt_ok(self, s) -> bool:
        if s is None:
            return True
        if isinstance(s, Block):
            return all(self._stmt_ok(x) for x in s.stmts)
        if isinstance(s, If):
            return self._clean(s.cond) and self._stmt_ok(s.then) and self._stmt_ok(s.other)
        if isinstance(s, Case):
            if isinstance(s.subject, Ref) and s.subject.name in self.vars:
                if not all(isinstance(lab, Ref) and lab.name in self.consts
                           for arm in s.arms for lab in arm.labels):
                    return False
            elif not (self._clean(s.subject) and all(self._clean(lab) for arm in s.arms for lab in arm.labels)):
                return False
            return all(self._stmt_ok(arm.body) for arm in s.arms) and self._stmt_ok(s.default)
        if isinstance(s, ProcAssign):
            targets = set(lvalue_targets(s.lhs))
            if targets & self.vars:
                return isinstance(s.lhs, Ref) and self._value(s.rhs)
            return self._clean(s.lhs) and self._clean(s.rhs)
        return False

    def valid(self) -> bool:
        ports = {p.name for p in self.m.ports}
        if self.vars & ports:
            return False
        if not all(self._clean(a.rhs) and not set(lvalue_targets(a.lhs)) & self.vars for a in self.m.assigns):
            return False
        return all(self._stmt_ok(b.body) for b in self.m.blocks)


def _children(e):
    if isinstance(e, Unary):
        return (e.operand,)
    if isinstance(e, Binary):
        return (e.left, e.right)
    if isinstance(e, Ternary):
        return (e.cond, e.then, e.other)
    if isinstance(e, Concat):
        return e.parts
    return ()


def _fsm_candidates(m: ModuleDecl):
    params = m.param_values()
    found = []
    for _, s, _ in statements(m):
        if not (isinstance(s, Case) and isinstance(s.subject, Ref) and s.subject.name in _regs(m)):
            continue
        labels = [lab for arm in s.arms for lab in arm.labels]
        if not labels or not all(isinstance(lab, Ref) and lab.name in params for lab in labels):
            continue
        consts = {lab.name for lab in labels}
        if len({params[c].bits for c in consts}) != len(consts):
            continue
        movable = [c for c in consts if params[c].bits != 0]
        if len(movable) < 2:
            continue
        fsm = _Fsm(m, s.subject.name, consts)
        if fsm.valid() and s.subject.name not in [x[0] for x in found]:
            found.append((s.subject.name, sorted(consts, key=lambda c: [p.name for p in m.params].index(c))))
    return found


def _fsm_sites(m):
    index = {n.name: i for i, n in enumerate(m.nets)}
    return [("nets", index[state]) for state, _ in _fsm_candidates(m)]


def _fsm_reencode(m, site, rng, seed):
    state = get_at(m, site).name
    consts = dict(_fsm_candidates(m))[state]
    params = m.param_values()
    # the zero code stays put: registers power up at zero before any reset
    movable = [c for c in consts if params[c].bits != 0]
    values = [params[c].bits for c in movable]
    perm = list(values)
    while perm == values:
        rng.shuffle(perm)
    new = dict(zip(movable, perm))
    return replace(m, params=tuple(
        replace(p, value=BitVecValue(p.value.width, new[p.name])) if p.name in new else p
        for p in m.params))


# -- implementation ---------------------------------------------------------------


def _if_sites(m):
    return [p for p, s, _ in statements(m) if isinstance(s, If)]


def _if_to_case(m, site, rng, seed):
    s = get_at(m, site)
    w = s.cond.width
    if w == 1:
        arms = (CaseArm((Literal(BitVecValue(1, 1), "b"),), s.then),)
        case = Case(s.cond, arms, s.other)
    else:
        arms = (CaseArm((Literal(BitVecValue(w, 0), "d"),), s.other if s.other is not None else Block(())),)
        case = Case(s.cond, arms, s.then)
    return replace_at(m, site, case)


def _case_sites(m):
    params = m.param_values()
    out = []
    for p, s, _ in statements(m):
        if isinstance(s, Case) and isinstance(s.subject, (Ref, BitSelect, PartSelect)) and all(
                isinstance(lab, Literal) or (isinstance(lab, Ref) and lab.name in params)
                for arm in s.arms for lab in arm.labels):
            out.append(p)
    return out


def _case_to_if(m, site, rng, seed):
    s = get_at(m, site)
    tail = s.default
    for arm in reversed(s.arms):
        tests = [Binary("==", s.subject, lab) for lab in arm.labels]
        cond = tests[0]
        for t in tests[1:]:
            cond = Binary("||", cond, t)
        tail = If(cond, arm.body, tail)
    return replace_at(m, site, tail if tail is not None else Block(()))


def _ternary_sites(m):
    return [p for p, s, _ in statements(m)
            if isinstance(s, ProcAssign) and isinstance(s.rhs, Ternary)
            and not _shift_hazard([s.rhs.then, s.rhs.other], s.lhs.width)]


def _ternary_to_if(m, site, rng, seed):
    s = get_at(m, site)
    t = s.rhs
    return replace_at(m, site, If(t.cond, replace(s, rhs=t.then), replace(s, rhs=t.other)))


# -- optimization -------------------------------------------------------------------

_DUAL = {"&": "|", "|": "&", "&&": "||", "||": "&&"}
_NEGATION = {"&": "~", "|": "~", "&&": "!", "||": "!"}


def _expand_sites(m):
    return [p for p, n in rvalue_nodes(m)
            if isinstance(n, Unary) and isinstance(n.operand, Binary)
            and _NEGATION.get(n.operand.op) == n.op]


def _de_morgan_expand(m, site, rng, seed):
    n = get_at(m, site)
    b = n.operand
    return replace_at(m, site, Binary(_DUAL[b.op], Unary(n.op, b.left), Unary(n.op, b.right)))


def _dm_factor_sites(m):
    out = []
    for p, n in rvalue_nodes(m):
        if isinstance(n, Binary) and n.op in _DUAL:
            neg = _NEGATION[_DUAL[n.op]]
            if all(isinstance(x, Unary) and x.op == neg for x in (n.left, n.right)):
                out.append(p)
    return out


def _de_morgan_factor(m, site, rng, seed):
    n = get_at(m, site)
    neg = n.left.op
    return replace_at(m, site, Unary(neg, Binary(_DUAL[n.op], n.left.operand, n.right.operand)))


def _power_of_two(e) -> Optional[int]:
    if isinstance(e, Literal) and e.sized and e.value.bits and not e.value.bits & (e.value.bits - 1):
        return e.value.bits.bit_length() - 1
    return None


def _strength_sites(m):
    out = []
    for p, n in rvalue_nodes(m):
        if not isinstance(n, Binary):
            continue
        if n.op == "*":
            for lit, x in ((n.right, n.left), (n.left, n.right)):
                if _power_of_two(lit) is not None and lit.width <= x.width:
                    out.append(p)
                    break
        elif n.op == "+" and n.left == n.right:
            out.append(p)
    return out


def _strength_reduce(m, site, rng, seed):
    n = get_at(m, site)
    if n.op == "+":
        x, k = n.left, 1
    elif _power_of_two(n.right) is not None and n.right.width <= n.left.width:
        x, k = n.left, _power_of_two(n.right)
    else:
        x, k = n.right, _power_of_two(n.left)
    return replace_at(m, site, Binary("<<", x, Literal(BitVecValue(32, k), "d", sized=False)))


# -- structural --------------------------------------------------------------------


def _contexts(e, ctx: int, path: Path):
    """Yield ``(path, node, context width)`` for every node under ``e``."""
    yield path, e, ctx
    if isinstance(e, BitSelect):
        yield from _contexts(e.index, e.index.width, path + ("index",))
    elif isinstance(e, Concat):
        for i, part in enumerate(e.parts):
            yield from _contexts(part, part.width, path + ("parts", i))
    elif isinstance(e, Unary):
        sub = ctx if e.op in ("~", "-") else e.operand.width
        yield from _contexts(e.operand, sub, path + ("operand",))
    elif isinstance(e, Binary):
        if e.op in ("<", "<=", ">", ">=", "==", "!="):
            w = max(e.left.width, e.right.width)
            yield from _contexts(e.left, w, path + ("left",))
            yield from _contexts(e.right, w, path + ("right",))
        elif e.op in ("<<", ">>"):
            yield from _contexts(e.left, ctx, path + ("left",))
            yield from _contexts(e.right, e.right.width, path + ("right",))
        elif e.op in ("&&", "||"):
            yield from _contexts(e.left, e.left.width, path + ("left",))
            yield from _contexts(e.right, e.right.width, path + ("right",))
        else:
            yield from _contexts(e.left, ctx, path + ("left",))
            yield from _contexts(e.right, ctx, path + ("right",))
    elif isinstance(e, Ternary):
        yield from _contexts(e.cond, e.cond.width, path + ("cond",))
        yield from _contexts(e.then, ctx, path + ("then",))
        yield from _contexts(e.other, ctx, path + ("other",))


def _factor_candidates(m):
    params = {p.name for p in m.params}
    for i, a in enumerate(m.assigns):
        ctx = max(a.lhs.width, a.rhs.width)
        for p, n, c in _contexts(a.rhs, ctx, ("assigns", i, "rhs")):
            if isinstance(n, (Unary, Binary, Ternary, Concat)) and any(
                    isinstance(x, (Ref, BitSelect, PartSelect)) and x.name not in params
                    for _, x in walk(n)):
                yield p, n, c


def _factor_sites(m):
    return [p for p, _, _ in _factor_candidates(m)]


def _factor_subexpression(m, site, rng, seed):
    ctx = {p: c for p, _, c in _factor_candidates(m)}[site]
    i = site[1]
    lhs = m.assigns[i].lhs
    base = (lhs.name if isinstance(lhs, (Ref, BitSelect, PartSelect)) else "expr") + "_f"
    name = _fresh(m, base)
    sub = get_at(m, site)
    m = replace_at(m, site, Ref(name))
    net = NetDecl(name, "wire", ctx - 1, 0)
    assigns = m.assigns[:i] + (ContinuousAssign(Ref(name), sub),) + m.assigns[i:]
    return replace(m, nets=m.nets + (net,), assigns=assigns)


# -- registry -----------------------------------------------------------------------

TRANSFORMS: Dict[str, Dict[str, Tuple[SiteFn, RewriteFn]]] = {
    "stylistic": {
        "rename_nets": (_rename_sites, _rename_nets),
        "reorder_assigns": (_reorder_sites, _reorder_assigns),
    },
    "architectural": {
        "assign_to_always": (_assign_to_always_sites, _assign_to_always),
        "always_to_assign": (_always_to_assign_sites, _always_to_assign),
        "fsm_reencode": (_fsm_sites, _fsm_reencode),
    },
    "implementation": {
        "if_to_case": (_if_sites, _if_to_case),
        "case_to_if": (_case_sites, _case_to_if),
        "ternary_to_if": (_ternary_sites, _ternary_to_if),
    },
    "optimization": {
        "de_morgan_expand": (_expand_sites, _de_morgan_expand),
        "de_morgan_factor": (_dm_factor_sites, _de_morgan_factor),
        "strength_reduction": (_strength_sites, _strength_reduce),
    },
    "structural": {
        "factor_subexpression": (_factor_sites, _factor_subexpression),
    },
}

ALL_TRANSFORMS: Tuple[EquivalenceTransform, ...] = tuple(
    EquivalenceTransform(cat, var) for cat in EQUIV_CATEGORIES for var in TRANSFORMS[cat])


def _variants(t: EquivalenceTransform) -> List[str]:
    return [t.variant] if t.variant is not None else list(TRANSFORMS[t.category])


def transform_sites(m: ModuleDecl, t: EquivalenceTransform) -> List[Path]:
    return ordered_unique(s for v in _variants(t) for s in TRANSFORMS[t.category][v][0](m))


def applicable(m: ModuleDecl, t: EquivalenceTransform) -> bool:
    return bool(transform_sites(m, t))


def apply_equivalence(m: ModuleDecl, t: EquivalenceTransform, seed: int,
                      site: Optional[Path] = None) -> Tuple[ModuleDecl, MutationRecord]:
    """Apply ``t`` at ``site`` (or a seed-chosen site) and return the rewritten module."""
    options = [(v, s) for v in _variants(t) for s in TRANSFORMS[t.category][v][0](m)]
    if not options:
        raise MutationError(f"{t.name} does not apply to {m.name}")
    if site is None:
        variant, site = rng_for(seed, "site").choice(options)
    else:
        site = tuple(site)
        matching = [v for v, s in options if s == site]
        if not matching:
            raise MutationError(f"{t.name}: {list(site)} is not a legal site")
        variant = matching[0] if len(matching) == 1 else rng_for(seed, "variant").choice(matching)
    rewrite = TRANSFORMS[t.category][variant][1]
    child = finish(rewrite(m, site, rng_for(seed, "choice"), seed))
    if not changed(m, child):
        raise MutationError(f"{t.category}:{variant} left the design unchanged")
    before = _site_snippet(m, site)
    after = _site_snippet(child, site)
    return child, MutationRecord(EquivalenceTransform(t.category, variant), site, before, after, seed)


def _site_snippet(m: ModuleDecl, site: Path) -> str:
    try:
        node = get_at(m, site)
    except (AttributeError, IndexError, TypeError):
        return ""
    if isinstance(node, tuple):
        return "\n".join(snippet(x) for x in node)
    return snippet(node)


def replay_equivalence(parent: ModuleDecl, record: MutationRecord) -> ModuleDecl:
    return apply_equivalence(parent, record.operator, record.seed, site=record.site)[0]


__all__ = [
    "ALL_TRANSFORMS", "EQUIV_CATEGORIES", "EquivalenceTransform", "TRANSFORMS",
    "apply_equivalence", "applicable", "replay_equivalence", "transform_sites",
]
