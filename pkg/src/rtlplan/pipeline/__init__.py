"""Two-stage test-plan pipeline: prompts, plan parsing, stimulus compilation, evaluation."""

from .backends import (
    BackendError, ChatClient, ConstantJudge, HttpJudge, HttpPolicy, JudgeBackend, MockJudge,
    PolicyBackend, ScriptedPolicy, prompt_fingerprint,
)
from .evaluate import EvalConfig, SftPair, curate_sft, evaluate_all, evaluate_sample
from .plan import (
    PlanParseError, SpecRecord, TestPlan, iter_samples, parse_test_plan, render_stage1_prompt,
    render_stage2_prompt, spec_from_tree,
)
from .schema import ProgramParseError, SCHEMA_ID, parse_program, program_from_dict, program_to_dict, serialize_program
from .scripted import broken_program, plan_text_for, reference_program, script_sample, script_spec
from .template import TestbenchTemplate, make_template
