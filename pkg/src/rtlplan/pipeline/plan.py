"""Specs, stage-1/stage-2 prompts, and four-section test plans."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Dict, Iterable, List, Optional, Tuple

from ..hdl import ModuleDecl, SourceUnit, parse
from ..mutate import MutationTree, TreeNode

SECTIONS = ("difference", "stimuli", "expected_outputs", "reasoning")
SECTION_TITLES = {
    "difference": "Difference",
    "stimuli": "Stimuli",
    "expected_outputs": "Expected Outputs",
    "reasoning": "Reasoning",
}
_ALIASES = {
    "difference": "difference", "differences": "difference",
    "stimuli": "stimuli", "stimulus": "stimuli", "input stimuli": "stimuli",
    "expected outputs": "expected_outputs", "expected output": "expected_outputs",
    "expected": "expected_outputs",
    "reasoning": "reasoning", "supporting reasoning": "reasoning", "rationale": "reasoning",
}
# a heading line: optional markdown marks and "(1)" / "1." numbering, a known
# title, then either nothing or a colon followed by inline text
_HEADING = re.compile(
    r"^[ \t]*(?:#{1,6}[ \t]*)?(?:\*\*)?[ \t]*(?:\(?\d+[.)][ \t]*)?"
    r"(?P<title>" + "|".join(sorted((re.escape(a) for a in _ALIASES), key=len, reverse=True)) + r")"
    r"[ \t]*(?:\*\*)?[ \t]*(?::[ \t]*(?:\*\*)?[ \t]*(?P<rest>[^\n]*?))?[ \t]*$",
    re.IGNORECASE | re.MULTILINE,
)


class PlanParseError(ValueError):
    def __init__(self, section: str, message: str):
        super().__init__(message)
        self.section = section


@lru_cache(maxsize=None)
def prompt_template(name: str) -> Template:
    text = resources.files("rtlplan.pipeline.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return Template(text)


@dataclass(frozen=True)
class SpecRecord:
    id: str
    description: str
    golden: SourceUnit
    mutations: Tuple[TreeNode, ...] = ()
    circuit_type: Optional[str] = None

    def golden_ast(self) -> ModuleDecl:
        return parse(self.golden)

    def mutation(self, mutation_id: str) -> TreeNode:
        for n in self.mutations:
            if n.id == mutation_id:
                return n
        raise KeyError(f"spec '{self.id}' has no mutation '{mutation_id}'")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "golden": self.golden.text,
            "circuit_type": self.circuit_type,
            "mutations": [n.to_dict() for n in self.mutations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpecRecord":
        return cls(d["id"], d["description"], SourceUnit(d["golden"], d["id"]),
                   tuple(TreeNode.from_dict(n) for n in d.get("mutations", ())), d.get("circuit_type"))


def spec_from_tree(tree: MutationTree, description: str, spec_id: Optional[str] = None,
                   circuit_type: Optional[str] = None) -> SpecRecord:
    """Evaluation spec whose mutations are the tree's first-level mutants."""
    muts = tuple(n for n in tree.of_kind("mutation") if n.level == 1)
    return SpecRecord(spec_id or tree.name, description, tree.golden.code, muts, circuit_type)


@dataclass(frozen=True)
class TestPlan:
    __test__ = False  # not a pytest class

    difference: str
    stimuli: str
    expected_outputs: str
    reasoning: str

    def __post_init__(self):
        for name in SECTIONS:
            if not getattr(self, name).strip():
                raise PlanParseError(name, f"test plan section '{SECTION_TITLES[name]}' is empty")

    def render(self) -> str:
        return "\n\n".join(f"### {SECTION_TITLES[s]}\n{getattr(self, s).strip()}" for s in SECTIONS) + "\n"

    def to_dict(self) -> Dict[str, str]:
        return {s: getattr(self, s) for s in SECTIONS}


def parse_test_plan(text: str) -> TestPlan:
    """Pull the four sections out of ``text``, in any order.

    Prose before the first heading is ignored. When a heading repeats, the
    first occurrence wins.
    """
    marks: List[Tuple[int, int, str, str]] = []
    for m in _HEADING.finditer(text):
        marks.append((m.start(), m.end(), _ALIASES[m.group("title").lower()], m.group("rest") or ""))
    found: Dict[str, str] = {}
    for k, (_start, end, section, rest) in enumerate(marks):
        stop = marks[k + 1][0] if k + 1 < len(marks) else len(text)
        body = (rest + "\n" + text[end:stop]).strip()
        found.setdefault(section, body)
    for name in SECTIONS:
        if name not in found:
            raise PlanParseError(name, f"test plan is missing the '{SECTION_TITLES[name]}' section")
    return TestPlan(**found)


def render_stage1_prompt(spec: SpecRecord, mutation: TreeNode) -> str:
    if not spec.description.strip():
        raise ValueError(f"spec '{spec.id}' has an empty description")
    if all(n.id != mutation.id or n.fingerprint != mutation.fingerprint for n in spec.mutations):
        raise ValueError(f"mutation '{mutation.id}' does not belong to spec '{spec.id}'")
    return prompt_template("stage1").substitute(description=spec.description.strip(),
                                                code=mutation.code.text.rstrip())


def render_stage2_prompt(spec: SpecRecord, plan: TestPlan, template_text: str) -> str:
    return prompt_template("stage2").substitute(description=spec.description.strip(),
                                                plan=plan.render().rstrip(), template=template_text.rstrip())


def render_judge_prompt(plan: TestPlan) -> str:
    return prompt_template("judge").substitute(plan=plan.render().rstrip())


def iter_samples(specs: Iterable[SpecRecord]):
    for spec in specs:
        for mutation in spec.mutations:
            yield spec, mutation


__all__ = [
    "PlanParseError", "SECTIONS", "SpecRecord", "TestPlan", "iter_samples", "parse_test_plan",
    "prompt_template", "render_judge_prompt", "render_stage1_prompt", "render_stage2_prompt",
    "spec_from_tree",
]
