"""Canned plans and programs for offline runs of the two-stage pipeline.

A reference program is a random stimulus whose expectations are recorded
from the golden design, so it passes the golden by construction. Scripts pair
such programs (or deliberately broken ones) with the prompts the pipeline
will render, producing a ``ScriptedPolicy``.
"""

from __future__ import annotations

from dataclasses import replace
from typing import List, Optional

from ..hdl import ModuleDecl
from ..mutate import TreeNode
from ..sim import StimulusProgram, run_stimulus
from ..validate import RandomStimulusConfig, gen_random_program
from .backends import ScriptedPolicy
from .plan import SpecRecord, TestPlan, parse_test_plan, render_stage1_prompt, render_stage2_prompt
from .schema import serialize_program
from .template import make_template


def reference_program(design: ModuleDecl, steps: int = 16, seed: int = 0, index: int = 0) -> StimulusProgram:
    """Random drives with every output's golden value expected after each step."""
    cfg = RandomStimulusConfig(vectors=1, cycles_per_vector=steps, seed=seed)
    program = gen_random_program(design.ports, cfg, index)
    trace: List[dict] = []
    verdict = run_stimulus(design, program, trace=trace)
    if not verdict.passed:
        raise RuntimeError(f"golden {design.name} fails its own recorded program")
    new_steps = tuple(replace(s, expect=dict(t["outputs"])) for s, t in zip(program.steps, trace))
    return replace(program, steps=new_steps)


def broken_program(design: ModuleDecl, steps: int = 16, seed: int = 0, index: int = 0) -> StimulusProgram:
    """A reference program whose final expectation is off by one bit, so the golden fails it."""
    good = reference_program(design, steps, seed, index)
    last = good.steps[-1]
    name = sorted(last.expect)[0]
    expect = dict(last.expect)
    expect[name] ^= 1
    return replace(good, steps=good.steps[:-1] + (replace(last, expect=expect),))


def plan_text_for(spec: SpecRecord, mutation: TreeNode) -> str:
    op = mutation.record.operator.name if mutation.record else "unknown"
    return (
        "Comparing the description with the code.\n\n"
        f"### Difference\nThe implementation carries a suspected {op} change ({mutation.id}) relative to the description.\n\n"
        "### Stimuli\nApply reset, then drive randomized input values every cycle for sixteen cycles.\n\n"
        "### Expected Outputs\nEvery output matches the behavior described for a correct design at each step.\n\n"
        "### Reasoning\nBroad randomized drives after reset reach the altered logic and expose the difference.\n"
    )


def script_sample(policy: ScriptedPolicy, spec: SpecRecord, mutation: TreeNode, plan_text: str,
                  program_text: Optional[str]) -> None:
    """Register the stage-1 answer and, when given, the stage-2 answer for one sample."""
    policy.add(render_stage1_prompt(spec, mutation), plan_text)
    if program_text is None:
        return
    plan: TestPlan = parse_test_plan(plan_text)
    template = make_template(spec.golden_ast().ports)
    policy.add(render_stage2_prompt(spec, plan, template.skeleton), program_text)


def script_spec(policy: ScriptedPolicy, spec: SpecRecord, good: bool, steps: int = 16, seed: int = 0) -> None:
    """Script every mutation of ``spec`` with a reference program (``good``) or a broken one."""
    golden = spec.golden_ast()
    make = reference_program if good else broken_program
    for k, mutation in enumerate(spec.mutations):
        program = make(golden, steps, seed, k)
        script_sample(policy, spec, mutation, plan_text_for(spec, mutation), serialize_program(program))


__all__ = ["broken_program", "plan_text_for", "reference_program", "script_sample", "script_spec"]
