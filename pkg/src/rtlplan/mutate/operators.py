"""Semantics-altering mutation operators.

Each category is a small family of named AST rewrites (variants). A site is
the AST path of the node a variant rewrites. When an operator leaves the
variant open, the seed picks one among those applicable at the site; the
record always stores the resolved variant so replay is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

from ..hdl.ast import (
    Binary, BitSelect, BitVecValue, Block, Case, If, Literal, ModuleDecl, NetDecl,
    PartSelect, Path, ProcAssign, Ref, SensEntry, SensitivityList, Ternary, Unary,
    get_at, lvalue_targets, refs_in, replace_at, stmt_reads, walk,
)
from ..hdl.conventions import infer_clock_reset, is_reset_name
from .common import (
    MutationError, MutationRecord, changed, declared_ranges, finish,
    ordered_unique, rng_for, rvalue_nodes, rvalue_roots, signal_refs, snippet,
    statements,
)

CATEGORIES = (
    "logic_gate_swap", "always_block_type", "blocking_nonblocking", "signal_inversion",
    "condition_boundary", "off_by_one_indexing", "operator_swap", "timing_construct",
    "reset_logic_error", "sensitivity_list", "race_condition", "fsm_state_corruption",
    "bit_width_mismatch", "variable_swap_within_line",
)

SiteFn = Callable[[ModuleDecl], List[Path]]
# a rewrite returns the path it replaces and the replacement node
RewriteFn = Callable[[ModuleDecl, Path, object], Tuple[Path, object]]


@dataclass(frozen=True)
class MutationOperator:
    category: str
    variant: Optional[str] = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown mutation category '{self.category}'")
        if self.variant is not None and self.variant not in VARIANTS[self.category]:
            raise ValueError(f"'{self.variant}' is not a variant of {self.category}")

    @property
    def name(self) -> str:
        return self.category if self.variant is None else f"{self.category}:{self.variant}"

    def to_dict(self) -> dict:
        return {"kind": "mutation", "category": self.category, "variant": self.variant}

    @classmethod
    def from_dict(cls, d: dict) -> "MutationOperator":
        return cls(d["category"], d.get("variant"))

    @classmethod
    def parse(cls, text: str) -> "MutationOperator":
        cat, _, var = text.partition(":")
        return cls(cat, var or None)


# -- shared predicates ----------------------------------------------------------


def _node_sites(m: ModuleDecl, pred) -> List[Path]:
    return [p for p, n in rvalue_nodes(m) if pred(n)]


def _binary_sites(op: str) -> SiteFn:
    return lambda m: _node_sites(m, lambda n: isinstance(n, Binary) and n.op == op)


def _set_op(op: str) -> RewriteFn:
    def rewrite(m, site, rng):
        return site, replace(get_at(m, site), op=op)
    return rewrite


def _constant_value(e, m: ModuleDecl) -> Optional[BitVecValue]:
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, Ref):
        return m.param_values().get(e.name)
    return None


# -- logic_gate_swap / operator_swap / condition_boundary ----------------------

_GATE_NAMES = {"&": "and", "|": "or", "^": "xor"}
_SWAPS = {
    "logic_gate_swap": [(a, b) for a in "&|^" for b in "&|^" if a != b],
    "condition_boundary": [("<", "<="), ("<=", "<"), (">", ">="), (">=", ">")],
    "operator_swap": [("+", "-"), ("-", "+"), ("*", "+"), ("<<", ">>"), (">>", "<<"),
                      ("==", "!="), ("!=", "=="), ("&&", "||"), ("||", "&&")],
}
_OP_NAMES = {"<": "lt", "<=": "le", ">": "gt", ">=": "ge", "+": "add", "-": "sub",
             "*": "mul", "<<": "shl", ">>": "shr", "==": "eq", "!=": "ne",
             "&&": "land", "||": "lor", **_GATE_NAMES}


def _swap_family(category: str) -> Dict[str, Tuple[SiteFn, RewriteFn]]:
    return {f"{_OP_NAMES[a]}_to_{_OP_NAMES[b]}": (_binary_sites(a), _set_op(b))
            for a, b in _SWAPS[category]}


# -- always_block_type -----------------------------------------------------------


def _edge_block_sites(m):
    return [("blocks", i, "sensitivity") for i, b in enumerate(m.blocks) if b.sequential]


def _comb_block_sites(m):
    if infer_clock_reset(m.ports).clock is None:
        return []
    return [("blocks", i, "sensitivity") for i, b in enumerate(m.blocks) if not b.sequential]


def _to_comb(m, site, rng):
    return site, SensitivityList("star")


def _to_seq(m, site, rng):
    clock = infer_clock_reset(m.ports).clock
    return site, SensitivityList("explicit", (SensEntry("posedge", clock),))


# -- blocking_nonblocking ----------------------------------------------------------


def _assign_sites(blocking: bool) -> SiteFn:
    return lambda m: [p for p, s, _ in statements(m)
                      if isinstance(s, ProcAssign) and s.blocking == blocking]


def _set_blocking(blocking: bool) -> RewriteFn:
    def rewrite(m, site, rng):
        return site, replace(get_at(m, site), blocking=blocking)
    return rewrite


# -- signal_inversion --------------------------------------------------------------


def _inversion_sites(m):
    return _node_sites(m, lambda n: isinstance(n, Unary) and n.op in ("~", "!"))


def _remove_inversion(m, site, rng):
    return site, get_at(m, site).operand


def _uninverted_signal_sites(m):
    params = {p.name for p in m.params}
    nodes = list(rvalue_nodes(m))
    under = {p + ("operand",) for p, n in nodes if isinstance(n, Unary) and n.op in ("~", "!")}
    return [p for p, n in nodes
            if isinstance(n, (Ref, BitSelect, PartSelect)) and n.name not in params and p not in under]


def _add_inversion(m, site, rng):
    return site, Unary("~", get_at(m, site))


# -- off_by_one_indexing -----------------------------------------------------------


def _select_shift_sites(delta: int) -> SiteFn:
    def sites(m):
        ranges = declared_ranges(m)
        out = []
        for p, n in rvalue_nodes(m):
            if isinstance(n, PartSelect):
                msb, lsb = ranges[n.name]
                if lsb <= n.lsb + delta and n.msb + delta <= msb:
                    out.append(p)
            elif isinstance(n, BitSelect) and isinstance(n.index, Literal):
                msb, lsb = ranges[n.name]
                if lsb <= n.index.value.bits + delta <= msb:
                    out.append(p)
        return out
    return sites


def _select_shift(delta: int) -> RewriteFn:
    def rewrite(m, site, rng):
        n = get_at(m, site)
        if isinstance(n, PartSelect):
            return site, replace(n, msb=n.msb + delta, lsb=n.lsb + delta)
        lit = n.index
        v = lit.value.bits + delta
        width = max(lit.width, v.bit_length(), 1)
        return site, replace(n, index=replace(lit, value=BitVecValue(width, v)))
    return rewrite


# -- timing_construct ---------------------------------------------------------------


def _edge_entry_sites(edge: str) -> SiteFn:
    return lambda m: [("blocks", i, "sensitivity", "entries", k)
                      for i, b in enumerate(m.blocks)
                      for k, e in enumerate(b.sensitivity.entries) if e.edge == edge]


def _set_edge(edge: str) -> RewriteFn:
    def rewrite(m, site, rng):
        return site, replace(get_at(m, site), edge=edge)
    return rewrite


# -- reset_logic_error ----------------------------------------------------------


def _is_reset_test(cond, m: ModuleDecl) -> bool:
    names = set(refs_in(cond)) - {p.name for p in m.params}
    if len(names) != 1:
        return False
    name = next(iter(names))
    port = m.port(name)
    return port is not None and port.direction == "input" and is_reset_name(name)


def _reset_if_sites(m):
    return [p for p, s, i in statements(m)
            if isinstance(s, If) and m.blocks[i].sequential and _is_reset_test(s.cond, m)]


def _ignore_reset(m, site, rng):
    s = get_at(m, site)
    return site, s.other if s.other is not None else Block(())


def _invert_reset(m, site, rng):
    s = get_at(m, site)
    c = s.cond
    cond = c.operand if isinstance(c, Unary) and c.op in ("!", "~") else Unary("!", c)
    return site, replace(s, cond=cond)


def _reset_value_sites(m):
    out = []
    for p in _reset_if_sites(m):
        s = get_at(m, p)
        for q, n in walk(s.then, p + ("then",)):
            if isinstance(n, ProcAssign) and _constant_value(n.rhs, m) is not None:
                out.append(q + ("rhs",))
    return out


def _wrong_reset_value(m, site, rng):
    old = get_at(m, site)
    v = _constant_value(old, m)
    base = old.base if isinstance(old, Literal) else "d"
    return site, Literal(BitVecValue(v.width, v.bits ^ 1), base, sized=True)


# -- sensitivity_list ---------------------------------------------------------------


def _drop_entry_sites(m):
    return [("blocks", i, "sensitivity", "entries", k)
            for i, b in enumerate(m.blocks)
            if len(b.sensitivity.entries) >= 2
            for k in range(len(b.sensitivity.entries))]


def _drop_entry(m, site, rng):
    sens_path = site[:-2]
    sens = get_at(m, sens_path)
    k = site[-1]
    return sens_path, replace(sens, entries=sens.entries[:k] + sens.entries[k + 1:])


def _block_reads(m: ModuleDecl, i: int) -> List[str]:
    params = {p.name for p in m.params}
    return ordered_unique(n for n in stmt_reads(m.blocks[i].body) if n not in params)


def _star_sites(m):
    return [("blocks", i, "sensitivity") for i, b in enumerate(m.blocks)
            if b.sensitivity.kind == "star" and len(_block_reads(m, i)) >= 2]


def _star_to_partial(m, site, rng):
    reads = _block_reads(m, site[1])
    dropped = rng.choice(reads)
    entries = tuple(SensEntry("level", r) for r in reads if r != dropped)
    return site, SensitivityList("explicit", entries)


# -- race_condition -------------------------------------------------------------------


def _shares_edge(a, b) -> bool:
    return bool({(e.edge, e.signal) for e in a.sensitivity.entries if e.edge != "level"}
                & {(e.edge, e.signal) for e in b.sensitivity.entries if e.edge != "level"})


def _race_sites(m):
    out = []
    for i, blk in enumerate(m.blocks):
        if not blk.sequential:
            continue
        base = ("blocks", i, "body")
        order = list(walk(blk.body, base))
        for pos, (p, s) in enumerate(order):
            if not isinstance(s, ProcAssign) or s.blocking:
                continue
            targets = set(lvalue_targets(s.lhs))
            later = set()
            for q, n in order[pos + 1:]:
                if q[:len(p)] == p:
                    continue
                if isinstance(n, (Ref, BitSelect, PartSelect)) and "lhs" not in q:
                    later.add(n.name)
            for j in range(i + 1, len(m.blocks)):
                other = m.blocks[j]
                if other.sequential and _shares_edge(blk, other):
                    later.update(stmt_reads(other.body))
            if targets & later:
                out.append(p)
    return out


def _nba_to_blocking(m, site, rng):
    return site, replace(get_at(m, site), blocking=True)


# -- fsm_state_corruption -----------------------------------------------------------


def _fsms(m: ModuleDecl):
    """(case path, state register, label constants) for every case over a register."""
    params = m.param_values()
    regs = {n.name for n in m.nets if n.is_reg} | {p.name for p in m.ports if p.is_reg}
    out = []
    for p, s, _ in statements(m):
        if isinstance(s, Case) and isinstance(s.subject, Ref) and s.subject.name in regs:
            labels = [lab for arm in s.arms for lab in arm.labels]
            if len(labels) >= 2 and all(
                    isinstance(lab, Literal) or (isinstance(lab, Ref) and lab.name in params)
                    for lab in labels):
                out.append((p, s.subject.name, labels))
    return out


def _label_key(lab, m):
    return _constant_value(lab, m).bits


def _next_state_sites(m):
    out = []
    for _, state, labels in _fsms(m):
        targets = {state}
        for _, s, _ in statements(m):
            if isinstance(s, ProcAssign) and lvalue_targets(s.lhs) == (state,) and isinstance(s.rhs, Ref) \
                    and s.rhs.name not in m.param_values():
                targets.add(s.rhs.name)
        values = {_label_key(lab, m) for lab in labels}
        for p, s, _ in statements(m):
            if not (isinstance(s, ProcAssign) and set(lvalue_targets(s.lhs)) & targets):
                continue
            for q, n in walk(s.rhs, p + ("rhs",)):
                v = _constant_value(n, m)
                if v is not None and v.bits in values and _foldable_position(s.rhs, q[len(p) + 1:]):
                    out.append(q)
    return ordered_unique(out)


def _foldable_position(rhs, rel: Path) -> bool:
    """True when ``rel`` reaches a constant through ternary branches only."""
    node = rhs
    for step in rel:
        if not isinstance(node, Ternary) or step not in ("then", "other"):
            return False
        node = getattr(node, step)
    return True


def _other_constant(m, old, labels, rng):
    v = _constant_value(old, m)
    options = ordered_unique(
        (lab.name if isinstance(lab, Ref) else None, _label_key(lab, m)) for lab in labels)
    options = [o for o in options if o[1] != v.bits]
    if not options:
        raise MutationError("no alternative state constant")
    name, value = rng.choice(options)
    if name is not None:
        return Ref(name)
    return Literal(BitVecValue.of(v.width, value), "d", sized=True)


def _wrong_next_state(m, site, rng):
    labels = [lab for _, _, labs in _fsms(m) for lab in labs]
    return site, _other_constant(m, get_at(m, site), labels, rng)


def _label_sites(m):
    out = []
    for p, _, _ in _fsms(m):
        case = get_at(m, p)
        for k, arm in enumerate(case.arms):
            for l_idx in range(len(arm.labels)):
                out.append(p + ("arms", k, "labels", l_idx))
    return out


def _corrupt_label(m, site, rng):
    case = get_at(m, site[:-4])
    labels = [lab for arm in case.arms for lab in arm.labels]
    return site, _other_constant(m, get_at(m, site), labels, rng)


def _state_param_sites(m):
    names = set()
    for _, _, labels in _fsms(m):
        names.update(lab.name for lab in labels if isinstance(lab, Ref))
    idx = [i for i, p in enumerate(m.params) if p.name in names]
    if len({m.params[i].value.bits for i in idx}) < 2:
        return []
    return [("params", i) for i in idx]


def _param_alias(m, site, rng):
    target = get_at(m, site)
    names = set()
    for _, _, labels in _fsms(m):
        names.update(lab.name for lab in labels if isinstance(lab, Ref))
    options = ordered_unique(p.value.bits for p in m.params
                             if p.name in names and p.value.bits != target.value.bits)
    value = rng.choice(options)
    return site, replace(target, value=BitVecValue.of(target.value.width, value))


# -- bit_width_mismatch -----------------------------------------------------------


def _narrow_net_sites(m):
    out = []
    for i, n in enumerate(m.nets):
        if n.width < 2:
            continue
        site = ("nets", i)
        try:
            finish(replace_at(m, site, _narrowed(n)))
        except MutationError:
            continue
        out.append(site)
    return out


def _narrowed(n: NetDecl) -> NetDecl:
    return replace(n, msb=n.msb - 1)


def _narrow_net(m, site, rng):
    return site, _narrowed(get_at(m, site))


def _narrow_select_sites(m):
    return _node_sites(m, lambda n: isinstance(n, PartSelect) and n.msb > n.lsb)


def _narrow_select(m, site, rng):
    n = get_at(m, site)
    return site, replace(n, msb=n.msb - 1)


# -- variable_swap_within_line ----------------------------------------------------


def _swap_pairs(e, m) -> List[Tuple[Path, Path]]:
    refs = list(signal_refs(e, m))
    return [(pa, pb) for i, (pa, a) in enumerate(refs) for pb, b in refs[i + 1:] if a.name != b.name]


def _swap_sites(m):
    return [p for p, root in rvalue_roots(m) if _swap_pairs(root, m)]


def _swap_refs(m, site, rng):
    root = get_at(m, site)
    pa, pb = rng.choice(_swap_pairs(root, m))
    a, b = get_at(root, pa), get_at(root, pb)
    return site, replace_at(replace_at(root, pa, b), pb, a)


# -- registry -------------------------------------------------------------------------

VARIANTS: Dict[str, Dict[str, Tuple[SiteFn, RewriteFn]]] = {
    "logic_gate_swap": _swap_family("logic_gate_swap"),
    "always_block_type": {
        "to_comb": (_edge_block_sites, _to_comb),
        "to_seq": (_comb_block_sites, _to_seq),
    },
    "blocking_nonblocking": {
        "to_nonblocking": (_assign_sites(True), _set_blocking(False)),
        "to_blocking": (_assign_sites(False), _set_blocking(True)),
    },
    "signal_inversion": {
        "remove_inversion": (_inversion_sites, _remove_inversion),
        "add_inversion": (_uninverted_signal_sites, _add_inversion),
    },
    "condition_boundary": _swap_family("condition_boundary"),
    "off_by_one_indexing": {
        "shift_up": (_select_shift_sites(1), _select_shift(1)),
        "shift_down": (_select_shift_sites(-1), _select_shift(-1)),
    },
    "operator_swap": _swap_family("operator_swap"),
    "timing_construct": {
        "posedge_to_negedge": (_edge_entry_sites("posedge"), _set_edge("negedge")),
        "negedge_to_posedge": (_edge_entry_sites("negedge"), _set_edge("posedge")),
    },
    "reset_logic_error": {
        "ignore_reset": (_reset_if_sites, _ignore_reset),
        "invert_reset": (_reset_if_sites, _invert_reset),
        "wrong_reset_value": (_reset_value_sites, _wrong_reset_value),
    },
    "sensitivity_list": {
        "drop_entry": (_drop_entry_sites, _drop_entry),
        "star_to_partial": (_star_sites, _star_to_partial),
    },
    "race_condition": {
        "nba_to_blocking": (_race_sites, _nba_to_blocking),
    },
    "fsm_state_corruption": {
        "wrong_next_state": (_next_state_sites, _wrong_next_state),
        "corrupt_label": (_label_sites, _corrupt_label),
        "param_alias": (_state_param_sites, _param_alias),
    },
    "bit_width_mismatch": {
        "narrow_net": (_narrow_net_sites, _narrow_net),
        "narrow_select": (_narrow_select_sites, _narrow_select),
    },
    "variable_swap_within_line": {
        "swap_refs": (_swap_sites, _swap_refs),
    },
}

LEVEL2_POOL: Tuple[MutationOperator, ...] = tuple(
    MutationOperator(cat, var) for cat in CATEGORIES for var in VARIANTS[cat])


def _variants(op: MutationOperator) -> List[str]:
    return [op.variant] if op.variant is not None else list(VARIANTS[op.category])


def variant_sites(m: ModuleDecl, category: str, variant: str) -> List[Path]:
    return VARIANTS[category][variant][0](m)


def enumerate_sites(m: ModuleDecl, op: MutationOperator) -> List[Path]:
    """Legal application points of ``op`` in ``m``; empty when inapplicable."""
    return ordered_unique(s for v in _variants(op) for s in variant_sites(m, op.category, v))


def apply_mutation(m: ModuleDecl, op: MutationOperator, site: Path, seed: int) -> Tuple[ModuleDecl, MutationRecord]:
    site = tuple(site)
    choices = [v for v in _variants(op) if site in variant_sites(m, op.category, v)]
    if not choices:
        raise MutationError(f"{op.name}: {list(site)} is not a legal site")
    variant = choices[0] if len(choices) == 1 else rng_for(seed, "variant").choice(choices)
    rewrite = VARIANTS[op.category][variant][1]
    path, node = rewrite(m, site, rng_for(seed, "choice"))
    child = finish(replace_at(m, path, node))
    if not changed(m, child):
        raise MutationError(f"{op.category}:{variant} at {list(site)} left the design unchanged")
    record = MutationRecord(MutationOperator(op.category, variant), site,
                            snippet(get_at(m, path)), snippet(get_at(child, path)), seed)
    return child, record


def replay_mutation(parent: ModuleDecl, record: MutationRecord) -> ModuleDecl:
    return apply_mutation(parent, record.operator, record.site, record.seed)[0]


__all__ = [
    "CATEGORIES", "LEVEL2_POOL", "MutationError", "MutationOperator", "VARIANTS",
    "apply_mutation", "enumerate_sites", "replay_mutation", "variant_sites",
]
