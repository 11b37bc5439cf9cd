"""Branching trees: golden design, validated equivalents, and leveled mutants.

Node ids are positional (``golden``, ``e2``, ``e2/m1``, ``e2/m1/m1``) and every
random choice is drawn from a generator keyed by ``(seed, node id, attempt)``,
so a rebuild with the same configuration reproduces the tree exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from ..hdl import ModuleDecl, SourceUnit, ast_fingerprint, emit, parse
from ..parallel import ordered_map
from ..validate import RandomStimulusConfig, ValidationReport, Validator
from .common import MutationError, MutationRecord, rng_for
from .equivalence import ALL_TRANSFORMS, EquivalenceTransform, apply_equivalence, transform_sites
from .operators import (
    CATEGORIES, LEVEL2_POOL, MutationOperator, apply_mutation, enumerate_sites,
)

KINDS = ("golden", "equivalent", "mutation")
RETRY_BUDGET = 8


@dataclass(frozen=True)
class TreeConfig:
    n_equivalents: int = 5
    n_level1: int = 3
    max_depth: int = 2
    n_level2: int = 1
    level2_operator_pool: Tuple[MutationOperator, ...] = LEVEL2_POOL
    vectors_per_validation: int = 10_000
    seed: int = 0
    retry_budget: int = RETRY_BUDGET
    # decides which level-1 mutants receive level-2 children; None means all
    level2_select: Optional[Callable[["TreeNode"], bool]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("n_equivalents", "n_level1", "n_level2", "retry_budget"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.vectors_per_validation < 1:
            raise ValueError("vectors_per_validation must be >= 1")

    def stimulus(self) -> RandomStimulusConfig:
        return RandomStimulusConfig(vectors=self.vectors_per_validation, seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "n_equivalents": self.n_equivalents,
            "n_level1": self.n_level1,
            "max_depth": self.max_depth,
            "n_level2": self.n_level2,
            "level2_operator_pool": [op.name for op in self.level2_operator_pool],
            "vectors_per_validation": self.vectors_per_validation,
            "seed": self.seed,
            "retry_budget": self.retry_budget,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeConfig":
        d = dict(d)
        if "level2_operator_pool" in d:
            d["level2_operator_pool"] = tuple(MutationOperator.parse(s) for s in d["level2_operator_pool"])
        return cls(**d)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TreeNode:
    id: str
    parent_id: Optional[str]
    kind: str
    level: int
    code: SourceUnit
    fingerprint: str
    record: Optional[MutationRecord] = None
    validation: Optional[ValidationReport] = None
    module: Optional[ModuleDecl] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown node kind '{self.kind}'")

    def ast(self) -> ModuleDecl:
        return self.module if self.module is not None else parse(self.code)

    @property
    def category(self) -> Optional[str]:
        return self.record.operator.category if self.record else None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "parent_id": self.parent_id,
            "kind": self.kind,
            "level": self.level,
            "operator": self.record.operator.name if self.record else None,
            "seed": self.record.seed if self.record else None,
            "record": self.record.to_dict() if self.record else None,
            "fingerprint": self.fingerprint,
            "code": self.code.text,
            "validation": self.validation.to_dict() if self.validation else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        return cls(
            id=d["id"], parent_id=d.get("parent_id"), kind=d["kind"], level=int(d["level"]),
            code=SourceUnit(d["code"], d["id"]), fingerprint=d["fingerprint"],
            record=MutationRecord.from_dict(d["record"]) if d.get("record") else None,
            validation=ValidationReport.from_dict(d["validation"]) if d.get("validation") else None,
        )


@dataclass(frozen=True)
class Shortfall:
    slot: str
    parent_id: str
    kind: str
    attempts: int
    reason: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class MutationTree:
    name: str
    config: TreeConfig
    nodes: Dict[str, TreeNode] = field(default_factory=dict)
    shortfalls: List[Shortfall] = field(default_factory=list)

    @property
    def golden(self) -> TreeNode:
        return self.nodes["golden"]

    def children(self, node_id: str) -> List[TreeNode]:
        return [n for n in self.nodes.values() if n.parent_id == node_id]

    def of_kind(self, kind: str) -> List[TreeNode]:
        return [n for n in self.nodes.values() if n.kind == kind]

    def fingerprints(self) -> List[str]:
        return sorted(n.fingerprint for n in self.nodes.values())

    def stats(self) -> dict:
        muts = self.of_kind("mutation")
        levels: Dict[int, int] = {}
        for n in muts:
            levels[n.level] = levels.get(n.level, 0) + 1
        return {
            "name": self.name,
            "base": 1,
            "equivalents": len(self.of_kind("equivalent")),
            "level1": levels.get(1, 0),
            "level2": levels.get(2, 0),
            "deeper": sum(v for k, v in levels.items() if k > 2),
            "nodes": len(self.nodes),
            "shortfalls": len(self.shortfalls),
        }

    def violations(self) -> List[str]:
        """Structural invariant violations; empty for a well-formed tree."""
        out = []
        goldens = self.of_kind("golden")
        if len(goldens) != 1 or goldens[0].parent_id is not None or goldens[0].level != 0:
            out.append("tree needs exactly one parentless level-0 golden node")
        fps = [n.fingerprint for n in self.nodes.values()]
        if len(set(fps)) != len(fps):
            out.append("duplicate fingerprints")
        for n in self.nodes.values():
            if n.kind == "golden":
                continue
            parent = self.nodes.get(n.parent_id)
            if parent is None:
                out.append(f"{n.id}: missing parent {n.parent_id}")
                continue
            if n.kind == "equivalent":
                if parent.kind != "golden" or n.level != 0:
                    out.append(f"{n.id}: equivalents sit at level 0 under golden")
                if n.validation is None or n.validation.mismatches != 0:
                    out.append(f"{n.id}: equivalent without a clean validation")
            else:
                if n.level != parent.level + 1:
                    out.append(f"{n.id}: level {n.level} under parent level {parent.level}")
                if n.validation is None or n.validation.mismatches <= 0:
                    out.append(f"{n.id}: mutation without a positive-mismatch validation")
            if n.record is None:
                out.append(f"{n.id}: missing provenance record")
        return out

    def to_records(self) -> List[dict]:
        return [n.to_dict() for n in self.nodes.values()]

    @classmethod
    def from_records(cls, name: str, config: TreeConfig, records: Iterable[dict],
                     shortfalls: Iterable[dict] = ()) -> "MutationTree":
        nodes = {}
        for r in records:
            node = TreeNode.from_dict(r)
            nodes[node.id] = node
        return cls(name, config, nodes, [Shortfall(**s) for s in shortfalls])


def _node(node_id, parent_id, kind, level, m: ModuleDecl, record=None, validation=None) -> TreeNode:
    return TreeNode(node_id, parent_id, kind, level, emit(m, origin=node_id), ast_fingerprint(m),
                    record, validation, module=m)


def _prefer_unused(options: List, used: set, key) -> List:
    fresh = [o for o in options if key(o) not in used]
    return fresh or options


class _Builder:
    def __init__(self, golden: ModuleDecl, cfg: TreeConfig, validator):
        self.golden = golden
        self.cfg = cfg
        self.validate = validator
        self.tree = MutationTree(golden.name, cfg)
        self.seen = set()

    def add(self, node: TreeNode) -> None:
        self.tree.nodes[node.id] = node
        self.seen.add(node.fingerprint)

    def fill(self, slot: str, parent: TreeNode, kind: str, propose) -> Optional[TreeNode]:
        """Try up to ``retry_budget`` proposals for one child slot."""
        reason = "no applicable operator"
        attempts = 0
        for attempt in range(max(1, self.cfg.retry_budget)):
            attempts = attempt + 1
            rng = rng_for(self.cfg.seed, f"{self.tree.name}/{slot}/{attempt}")
            try:
                proposal = propose(rng)
            except MutationError as exc:
                reason = str(exc)
                continue
            if proposal is None:
                break
            child, record = proposal
            fp = ast_fingerprint(child)
            if fp in self.seen:
                reason = "duplicate fingerprint"
                continue
            report = self.validate(self.golden, child)
            if kind == "equivalent" and not report.clean:
                reason = "equivalent candidate failed validation"
                continue
            if kind == "mutation" and report.clean:
                reason = "mutant indistinguishable from golden"
                continue
            level = 0 if kind == "equivalent" else parent.level + 1
            node = _node(slot, parent.id, kind, level, child, record, report)
            self.add(node)
            return node
        self.tree.shortfalls.append(Shortfall(slot, parent.id, kind, attempts, reason))
        return None

    def equivalents(self) -> List[TreeNode]:
        golden = self.tree.golden
        options = [t for t in ALL_TRANSFORMS if transform_sites(self.golden, t)]
        used: set = set()
        out = []
        for i in range(1, self.cfg.n_equivalents + 1):
            def propose(rng):
                if not options:
                    return None
                t = rng.choice(_prefer_unused(options, used, lambda t: t.category))
                return apply_equivalence(self.golden, t, rng.randrange(2 ** 31))

            node = self.fill(f"e{i}", golden, "equivalent", propose)
            if node is not None:
                used.add(node.record.operator.category)
                out.append(node)
        return out

    def mutants(self, parent: TreeNode, count: int, pool: List[MutationOperator]) -> List[TreeNode]:
        m = parent.ast()
        options = [op for op in pool if enumerate_sites(m, op)]
        used: set = set()
        out = []
        for j in range(1, count + 1):
            def propose(rng):
                if not options:
                    return None
                op = rng.choice(_prefer_unused(options, used, lambda o: o.category))
                site = rng.choice(enumerate_sites(m, op))
                return apply_mutation(m, op, site, rng.randrange(2 ** 31))

            node = self.fill(f"{parent.id}/m{j}", parent, "mutation", propose)
            if node is not None:
                used.add(node.record.operator.category)
                out.append(node)
        return out


def build_tree(golden: ModuleDecl, cfg: TreeConfig = TreeConfig(), validator=None,
               workers: int = 1) -> MutationTree:
    """Grow a validated equivalence/mutation tree from ``golden``.

    Under-filled slots are recorded in ``tree.shortfalls`` rather than raised.
    """
    if validator is None:
        validator = Validator(cfg.stimulus(), workers=workers)
    b = _Builder(golden, cfg, validator)
    b.add(_node("golden", None, "golden", 0, golden))
    roots = b.equivalents() or [b.tree.golden]
    level1_pool = [MutationOperator(c) for c in CATEGORIES]
    frontier = []
    for root in roots:
        frontier.extend(b.mutants(root, cfg.n_level1, level1_pool))
    pool = list(cfg.level2_operator_pool)
    for _depth in range(2, cfg.max_depth + 1):
        nxt = []
        for node in frontier:
            if cfg.level2_select is None or cfg.level2_select(node):
                nxt.extend(b.mutants(node, cfg.n_level2, pool))
        frontier = nxt
    return b.tree


def _build_one(task) -> MutationTree:
    golden, cfg = task
    return build_tree(golden, cfg)


def build_forest(goldens: Iterable[ModuleDecl], cfg: TreeConfig = TreeConfig(),
                 workers: int = 1) -> List[MutationTree]:
    """One tree per design, fanned out across ``workers`` processes, returned in input order."""
    return ordered_map(_build_one, [(g, cfg) for g in goldens], workers)


def replay_node(parent: ModuleDecl, record: MutationRecord) -> ModuleDecl:
    """Re-apply a provenance record to its parent design."""
    if isinstance(record.operator, EquivalenceTransform):
        return apply_equivalence(parent, record.operator, record.seed, site=record.site)[0]
    return apply_mutation(parent, record.operator, record.site, record.seed)[0]


def verify_provenance(tree: MutationTree) -> List[str]:
    """Replay every node's record from its parent; returns the ids that do not reproduce."""
    bad = []
    for n in tree.nodes.values():
        if n.record is None:
            continue
        try:
            child = replay_node(tree.nodes[n.parent_id].ast(), n.record)
        except (MutationError, KeyError):
            bad.append(n.id)
            continue
        if ast_fingerprint(child) != n.fingerprint:
            bad.append(n.id)
    return bad


def replay_tree(tree: MutationTree, validator=None, workers: int = 1) -> bool:
    """True when rebuilding from the golden node and stored config yields the same node set."""
    rebuilt = build_tree(tree.golden.ast(), tree.config, validator, workers)
    return rebuilt.fingerprints() == tree.fingerprints()


__all__ = [
    "KINDS", "MutationTree", "RETRY_BUDGET", "Shortfall", "TreeConfig", "TreeNode",
    "build_forest", "build_tree", "replay_node", "replay_tree", "verify_provenance",
]
