"""End-to-end sample evaluation and accept-if-detected SFT curation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from ..hdl import HdlError, parse
from ..metrics import EvalRecord, classify_circuit
from ..mutate import TreeNode
from ..parallel import ordered_map
from ..reward import compute_reward
from ..sim import DEFAULT_DELTA_LIMIT, SimulationError, Verdict, run_stimulus
from .backends import BackendError, JudgeBackend, PolicyBackend, prompt_fingerprint
from .plan import PlanParseError, SpecRecord, TestPlan, iter_samples, parse_test_plan, render_stage1_prompt, render_stage2_prompt
from .schema import ProgramParseError, parse_program
from .template import make_template


@dataclass(frozen=True)
class EvalConfig:
    delta_limit: int = DEFAULT_DELTA_LIMIT
    workers: int = 1

    def to_dict(self) -> dict:
        # the worker count never changes results, so it stays out of fingerprints
        return {"delta_limit": self.delta_limit}


def _run(design, program, delta_limit: int) -> Verdict:
    try:
        return run_stimulus(design, program, delta_limit=delta_limit)
    except (SimulationError, HdlError, ValueError) as exc:
        return Verdict.errored(f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class _Stage:
    plan_text: str = ""
    plan: Optional[TestPlan] = None
    program_text: str = ""
    program: object = None
    flags: Tuple[str, ...] = ()
    error: str = ""


def _stages(spec: SpecRecord, mutation: TreeNode, policy: PolicyBackend, artifacts: Dict[str, str]) -> _Stage:
    prompt1 = render_stage1_prompt(spec, mutation)
    artifacts["stage1_prompt_sha256"] = prompt_fingerprint(prompt1)
    try:
        plan_text = policy.generate_plan(prompt1)
    except BackendError as exc:
        return _Stage(flags=("backend_error",), error=f"stage 1: {exc}")
    try:
        plan = parse_test_plan(plan_text)
    except PlanParseError as exc:
        return _Stage(plan_text, flags=("plan_parse_error",), error=str(exc))
    template = make_template(spec.golden_ast().ports)
    prompt2 = render_stage2_prompt(spec, plan, template.skeleton)
    artifacts["stage2_prompt_sha256"] = prompt_fingerprint(prompt2)
    try:
        program_text = policy.compile_plan(prompt2)
    except BackendError as exc:
        return _Stage(plan_text, plan, flags=("backend_error",), error=f"stage 2: {exc}")
    try:
        program = parse_program(program_text)
    except ProgramParseError as exc:
        return _Stage(plan_text, plan, program_text, flags=("program_parse_error",), error=str(exc))
    return _Stage(plan_text, plan, program_text, program)


def evaluate_sample(spec: SpecRecord, mutation: TreeNode, policy: PolicyBackend, judge: JudgeBackend,
                    cfg: EvalConfig = EvalConfig()) -> EvalRecord:
    """Run both stages for one (spec, mutation) state and score the resulting program.

    The program runs on the golden design and on every mutation of the spec;
    ``r_m`` is taken over all of them while the record's mutation verdict is
    the one for ``mutation``. Failures at any stage become failed verdicts.
    """
    artifacts: Dict[str, str] = {}
    st = _stages(spec, mutation, policy, artifacts)
    flags = list(st.flags)
    golden = spec.golden_ast()
    judge_ok = False
    if st.plan is not None:
        try:
            judge_ok = bool(judge.judge(st.plan))
        except BackendError as exc:
            flags.append("judge_error")
            artifacts["judge_error"] = str(exc)
    if st.program is not None:
        golden_verdict = _run(golden, st.program, cfg.delta_limit)
        verdicts = {n.id: _run(parse(n.code), st.program, cfg.delta_limit) for n in spec.mutations}
    else:
        golden_verdict = Verdict.errored(st.error)
        verdicts = {n.id: Verdict.errored(st.error) for n in spec.mutations}
    if st.error:
        artifacts["error"] = st.error
    artifacts["plan_text"] = st.plan_text
    artifacts["program_text"] = st.program_text
    reward = compute_reward(golden_verdict, list(verdicts.values()), judge_ok, st.plan_text)
    return EvalRecord(
        spec_id=spec.id,
        mutation_id=mutation.id,
        golden_verdict=golden_verdict,
        mutation_verdict=verdicts[mutation.id],
        reward=reward,
        circuit_type=spec.circuit_type or classify_circuit(golden),
        mutation_category=mutation.category,
        flags=tuple(flags),
        artifacts=artifacts,
    )


def _evaluate_task(task) -> EvalRecord:
    spec, mutation, policy, judge, cfg = task
    return evaluate_sample(spec, mutation, policy, judge, cfg)


def evaluate_all(specs: Sequence[SpecRecord], policy: PolicyBackend, judge: JudgeBackend,
                 cfg: EvalConfig = EvalConfig()) -> List[EvalRecord]:
    """Evaluate every (spec, mutation) pair, in spec order, optionally across worker processes."""
    tasks = [(s, m, policy, judge, cfg) for s, m in iter_samples(specs)]
    return list(ordered_map(_evaluate_task, tasks, cfg.workers))


@dataclass(frozen=True)
class SftPair:
    prompt: str
    plan: str
    spec_id: str
    mutation_id: str
    program: str
    golden_verdict: Verdict
    mutation_verdict: Verdict

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt, "plan": self.plan, "spec_id": self.spec_id,
            "mutation_id": self.mutation_id, "program": self.program,
            "golden_verdict": self.golden_verdict.to_dict(),
            "mutation_verdict": self.mutation_verdict.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SftPair":
        return cls(d["prompt"], d["plan"], d["spec_id"], d["mutation_id"], d["program"],
                   Verdict.from_dict(d["golden_verdict"]), Verdict.from_dict(d["mutation_verdict"]))


def curate_sft(specs: Sequence[SpecRecord], policy: PolicyBackend, judge: JudgeBackend,
               cfg: EvalConfig = EvalConfig()) -> List[SftPair]:
    """Keep the (stage-1 prompt, plan) pairs whose program passes golden and fails the mutant."""
    records = evaluate_all(specs, policy, judge, cfg)
    pairs = []
    for (spec, mutation), rec in zip(iter_samples(specs), records):
        if rec.detected:
            pairs.append(SftPair(render_stage1_prompt(spec, mutation), rec.artifacts["plan_text"], spec.id,
                                 mutation.id, rec.artifacts["program_text"], rec.golden_verdict,
                                 rec.mutation_verdict))
    return pairs


__all__ = ["EvalConfig", "SftPair", "curate_sft", "evaluate_all", "evaluate_sample"]
