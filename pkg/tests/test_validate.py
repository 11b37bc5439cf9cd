from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURE_FILES
from designgen import random_comb_design
from refsim import RefSim, comb_outputs, exhaustive_points
from rtlplan.hdl import load, parse
from rtlplan.mutate import (
    ALL_TRANSFORMS, MutationError, MutationOperator, apply_equivalence, apply_mutation, enumerate_sites,
    transform_sites,
)
from rtlplan.validate import InterfaceError, RandomStimulusConfig, Validator, compare, gen_random_program

SMALL = RandomStimulusConfig(vectors=300)


def _mutant(m, category, variant=None, site=0):
    op = MutationOperator(category, variant)
    return apply_mutation(m, op, enumerate_sites(m, op)[site], 0)[0]


def test_same_seed_same_program(fixture):
    ports = fixture("counter").ports
    cfg = RandomStimulusConfig(seed=3)
    assert gen_random_program(ports, cfg, 17) == gen_random_program(ports, cfg, 17)
    assert gen_random_program(ports, cfg, 17) != gen_random_program(ports, cfg, 18)


def test_reset_held_inactive_without_toggles(fixture):
    ports = fixture("counter").ports
    cfg = RandomStimulusConfig(reset_toggle_probability=0.0, cycles_per_vector=20)
    for i in range(50):
        drives = [s.drives["rst_n"] for s in gen_random_program(ports, cfg, i).steps]
        assert drives[0] == 0 and set(drives[1:]) == {1}


def test_single_bit_drive_mean():
    ports = parse("module m(input a, output y); assign y = a; endmodule").ports
    cfg = RandomStimulusConfig(vectors=1000, cycles_per_vector=1, seed=0)
    values = [gen_random_program(ports, cfg, i).steps[0].drives["a"] for i in range(1000)]
    assert abs(np.mean(values) - 0.5) <= 0.05


@pytest.mark.parametrize("path", FIXTURE_FILES, ids=lambda p: p.stem)
def test_reflexive(path):
    m = load(path)
    r = compare(m, m, SMALL)
    assert r.mismatches == 0 and r.classification == "clean"


def test_inverter_mutant_differs_every_cycle(fixture):
    inv = fixture("inverter")
    cfg = RandomStimulusConfig(vectors=500, mismatch_cap=None)
    r = compare(inv, _mutant(inv, "signal_inversion"), cfg)
    assert r.classification == "mutated"
    assert r.mismatches == r.vectors_run * cfg.cycles_per_vector == 500 * 16


def _distinguishable_by_short_trace(golden, candidate, k=3):
    """Exhaustive oracle: does any length-k (en, rst_n) sequence separate the two counters?"""
    for seq in itertools.product(itertools.product((0, 1), repeat=2), repeat=k):
        a, b = RefSim(golden), RefSim(candidate)
        for en, rst in seq:
            for s in (a, b):
                s.drive({"en": en, "rst_n": rst})
                s.tick("clk")
            if a.read("count") != b.read("count"):
                return True
    return False


def test_counter_reset_mutant_is_mutated(fixture):
    counter = fixture("counter")
    mutant = _mutant(counter, "reset_logic_error", "ignore_reset")
    assert _distinguishable_by_short_trace(counter, mutant)
    r = compare(counter, mutant, RandomStimulusConfig(vectors=2000, reset_toggle_probability=0.1))
    assert r.classification == "mutated" and r.mismatches > 0


def _oracle_mismatches(golden, candidate, cfg):
    """Count cycles, over all vectors, where any output differs at any sample point, using the scalar scheduler."""
    total = 0
    outs = [p.name for p in golden.outputs]
    for i in range(cfg.vectors):
        prog = gen_random_program(golden.ports, cfg, i)
        a, b = RefSim(golden), RefSim(candidate)
        for step in prog.steps:
            # sampled after the drives settle, after the rising edge, and after the falling edge
            phases = [step.drives] + ([{prog.clock: 1}, {prog.clock: 0}] if prog.clock else [])
            differs = False
            for drives in phases:
                a.drive(drives)
                b.drive(drives)
                differs |= any(a.read(o) != b.read(o) for o in outs)
            total += differs
    return total


@pytest.mark.parametrize("name,category", [
    ("counter", "reset_logic_error"), ("pwm", "condition_boundary"), ("accumulator", "operator_swap"),
    ("byte_split", "off_by_one_indexing"), ("alu4", "logic_gate_swap"),
])
def test_mismatch_count_matches_reference(fixture, name, category):
    golden = fixture(name)
    try:
        mutant = _mutant(golden, category)
    except (IndexError, MutationError):
        pytest.skip(f"{category} has no site in {name}")
    cfg = RandomStimulusConfig(vectors=40, mismatch_cap=None, seed=5)
    assert compare(golden, mutant, cfg).mismatches == _oracle_mismatches(golden, mutant, cfg)


# categories whose mutants stay pure functions of the inputs, so a truth table describes them
EXPRESSION_CATEGORIES = ("logic_gate_swap", "signal_inversion", "condition_boundary", "off_by_one_indexing",
                         "operator_swap", "bit_width_mismatch", "variable_swap_within_line")


def _truth_table_differs(golden, candidate):
    points = exhaustive_points([(p.name, p.width) for p in golden.inputs])
    return any(comb_outputs(golden, pt) != comb_outputs(candidate, pt) for pt in points)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5000), st.sampled_from(EXPRESSION_CATEGORIES))
def test_classification_agrees_with_truth_table(seed, category):
    golden = parse(random_comb_design(seed, max_input_bits=8))
    sites = enumerate_sites(golden, MutationOperator(category))
    if not sites:
        return
    try:
        mutant = apply_mutation(golden, MutationOperator(category), sites[0], seed)[0]
    except MutationError:
        return
    # 8 input bits give 256 points; 3000 uniform vectors of 16 cycles miss one with odds < e^-180
    report = compare(golden, mutant, RandomStimulusConfig(vectors=3000, seed=seed))
    assert (report.classification == "mutated") == _truth_table_differs(golden, mutant)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5000), st.sampled_from(ALL_TRANSFORMS))
def test_equivalents_have_equal_truth_tables(seed, transform):
    golden = parse(random_comb_design(seed, max_input_bits=8))
    if not transform_sites(golden, transform):
        return
    variant = apply_equivalence(golden, transform, seed)[0]
    assert not _truth_table_differs(golden, variant)
    assert compare(golden, variant, RandomStimulusConfig(vectors=200, seed=seed)).clean


def test_more_vectors_never_unmutates(fixture):
    golden = fixture("bcd_counter")
    mutant = _mutant(golden, "condition_boundary")
    small = compare(golden, mutant, RandomStimulusConfig(vectors=100, mismatch_cap=None))
    large = compare(golden, mutant, RandomStimulusConfig(vectors=2500, mismatch_cap=None))
    if small.classification == "mutated":
        assert large.classification == "mutated"
        assert large.first_mismatch == small.first_mismatch
        assert large.mismatches >= small.mismatches


def test_reports_identical_across_workers(fixture):
    golden = fixture("traffic")
    mutant = _mutant(golden, "fsm_state_corruption")
    cfg = RandomStimulusConfig(vectors=3000)
    one = compare(golden, mutant, cfg, workers=1)
    assert compare(golden, mutant, cfg, workers=3) == one
    assert compare(golden, mutant, cfg, workers=1) == one


def test_cap_stops_early(fixture):
    inv = fixture("inverter")
    r = compare(inv, _mutant(inv, "signal_inversion"), RandomStimulusConfig(vectors=5000, mismatch_cap=8))
    assert r.capped and r.vectors_run < 5000


def test_interface_mismatch(fixture):
    with pytest.raises(InterfaceError):
        compare(fixture("inverter"), fixture("counter"))


def test_oscillating_candidate_is_mutated():
    g = parse("module m(input a, output y); assign y = a; endmodule")
    bad = parse("module m(input a, output y); wire t; assign t = a ^ ~t; assign y = t; endmodule")
    r = compare(g, bad, RandomStimulusConfig(vectors=10))
    assert r.classification == "mutated" and r.oscillation == "candidate"


def test_validator_wrapper(fixture):
    m = fixture("gates")
    assert Validator(SMALL)(m, m).clean


def test_config_rejects_bad_values():
    for kw in ({"vectors": 0}, {"reset_toggle_probability": 1.5}, {"input_distribution": "gauss"},
               {"mismatch_cap": 0}):
        with pytest.raises(ValueError):
            RandomStimulusConfig(**kw)
