from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURE_FILES
from designgen import random_comb_design
from rtlplan.hdl import (
    Binary, HdlSyntaxError, MultipleDriversError, UnresolvedIdentifierError, ast_fingerprint, emit,
    infer_clock_reset, load, parse, parse_literal,
)
from rtlplan.hdl.ast import walk
from rtlplan.mutate import EquivalenceTransform, MutationOperator, apply_equivalence, apply_mutation, enumerate_sites


def test_inverter_module():
    m = parse("module inv(input a, output y); assign y = ~a; endmodule")
    assert m.name == "inv"
    assert len(m.assigns) == 1
    assert all(p.width == 1 for p in m.ports)


def test_counter_has_one_sequential_block(fixture):
    m = fixture("counter")
    seq = [b for b in m.blocks if b.sequential]
    assert len(seq) == 1
    assert [(e.edge, e.signal) for e in seq[0].sensitivity.entries] == [("posedge", "clk"), ("negedge", "rst_n")]


def test_undeclared_identifier():
    with pytest.raises(UnresolvedIdentifierError):
        parse("module m(input a, output y); assign y = x; endmodule")


def test_double_driver_rejected():
    with pytest.raises(MultipleDriversError):
        parse("module m(input a, input b, output y); assign y = a; assign y = b; endmodule")


def test_syntax_error_has_position():
    with pytest.raises(HdlSyntaxError) as exc:
        parse("module m(input a, output y);\n  assign y = ;\nendmodule")
    assert exc.value.diagnostic.line == 2


@pytest.mark.parametrize("path", FIXTURE_FILES, ids=lambda p: p.stem)
def test_emit_round_trip(path):
    m = load(path)
    again = parse(emit(m))
    assert again == m
    assert emit(again).text == emit(m).text


def test_fixture_corpus_size():
    assert len(FIXTURE_FILES) >= 20


def test_fingerprint_ignores_whitespace():
    a = parse("module m(input a, output y); assign y = ~a; endmodule")
    b = parse("module m(\n  input a,\n  output y\n);\n\n   assign   y=~a ;\nendmodule\n")
    assert ast_fingerprint(a) == ast_fingerprint(b)


def test_fingerprint_changes_under_mutation_and_rename(fixture):
    m = fixture("inverter")
    op = MutationOperator("signal_inversion")
    mutant, _ = apply_mutation(m, op, enumerate_sites(m, op)[0], 0)
    assert ast_fingerprint(mutant) != ast_fingerprint(m)
    renamed, _ = apply_equivalence(fixture("pwm"), EquivalenceTransform.parse("stylistic:rename_nets"), 0)
    assert ast_fingerprint(renamed) != ast_fingerprint(fixture("pwm"))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_generated_designs_round_trip(seed):
    m = parse(random_comb_design(seed))
    assert parse(emit(m)) == m


@pytest.mark.parametrize("path", FIXTURE_FILES, ids=lambda p: p.stem)
def test_every_expression_has_a_width(path):
    m = load(path)
    for node in walk(m):
        if isinstance(node, Binary):
            assert node.width is not None and node.width >= 1


@pytest.mark.parametrize("text,width,value", [
    ("4'd9", 4, 9), ("8'hff", 8, 255), ("3'b101", 3, 5), ("12", 32, 12), ("2'd7", 2, 3),
])
def test_literals(text, width, value):
    lit = parse_literal(text)
    assert (lit.value.width, lit.value.bits) == (width, value)


@pytest.mark.parametrize("names,clock,reset,active", [
    (["clk", "rst_n", "en"], "clk", "rst_n", 0),
    (["clock", "rst", "d"], "clock", "rst", 1),
    (["a", "b"], None, None, 1),
])
def test_clock_reset_conventions(names, clock, reset, active):
    from rtlplan.hdl import PortDecl
    cr = infer_clock_reset([PortDecl(n, "input") for n in names])
    assert (cr.clock, cr.reset, cr.reset_active) == (clock, reset, active)
