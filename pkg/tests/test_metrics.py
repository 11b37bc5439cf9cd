from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from conftest import FIXTURE_FILES, FIXTURES
from rtlplan.hdl import load, parse
from rtlplan.metrics import EvalRecord, classify_circuit, compute_metrics, summarize
from rtlplan.reward import compute_reward
from rtlplan.sim import Verdict

PASS, FAIL = Verdict(True), Verdict(False, failing_step=0)


def rec(golden: bool, mutant_passes: bool, ctype="combinational", cat="operator_swap", i=0) -> EvalRecord:
    g, m = (PASS if golden else FAIL), (PASS if mutant_passes else FAIL)
    return EvalRecord(f"s{i}", f"m{i}", g, m, compute_reward(g, [m], True, "x"), ctype, cat)


def test_all_detected():
    r = compute_metrics([rec(True, False, i=i) for i in range(5)])
    assert (r.m1, r.m2) == (1.0, 1.0)


def test_all_golden_fail():
    r = compute_metrics([rec(False, i % 2 == 0, i=i) for i in range(6)])
    assert (r.m1, r.m2) == (0.0, 0.0)


def test_ten_records():
    records = [rec(True, False, i=i) for i in range(3)] + [rec(True, True, i=3)]
    records += [rec(False, False, i=i) for i in range(4, 10)]
    r = compute_metrics(records)
    assert (r.m1, r.m2, r.n) == (0.4, 0.3, 10)


def test_empty_rejected():
    with pytest.raises(ValueError):
        compute_metrics([])


def test_breakdowns():
    records = [rec(True, False, "sequential", "reset_logic_error", 0), rec(False, False, "combinational", "x", 1)]
    r = compute_metrics(records)
    assert r.by_circuit_type["sequential"]["m2"] == 1.0
    assert r.by_category["x"]["m1"] == 0.0
    assert "type:sequential" in r.table()


records_st = st.lists(st.tuples(st.booleans(), st.booleans(), st.sampled_from(["combinational", "sequential"])),
                      min_size=1, max_size=40)


@given(records_st)
def test_m2_never_exceeds_m1(spec):
    r = compute_metrics([rec(g, m, t, i=i) for i, (g, m, t) in enumerate(spec)])
    assert 0 <= r.m2 <= r.m1 <= 1


@given(records_st, st.integers(0, 40))
def test_summary_merges_associatively(spec, cut):
    records = [rec(g, m, t, i=i) for i, (g, m, t) in enumerate(spec)]
    assert summarize(records[:cut]) + summarize(records[cut:]) == summarize(records)


@given(records_st)
def test_report_is_deterministic(spec):
    records = [rec(g, m, t, i=i) for i, (g, m, t) in enumerate(spec)]
    assert compute_metrics(records, {"a": 1}) == compute_metrics(list(records), {"a": 1})


def test_record_round_trip():
    r = rec(True, False)
    assert EvalRecord.from_dict(json.loads(json.dumps(r.to_dict()))) == r


def test_classifier_examples(fixture):
    assert classify_circuit(fixture("inverter")) == "combinational"
    assert classify_circuit(fixture("counter")) == "sequential"
    m = parse("module c(input a, output reg y); always @(*) begin y = a; end endmodule")
    assert classify_circuit(m) == "combinational"


def test_classifier_agrees_with_labels():
    labels = json.loads((FIXTURES / "labels.json").read_text())
    assert {Path(p).name for p in FIXTURE_FILES} == set(labels)
    agree = sum(classify_circuit(load(FIXTURES / name)) == lab["type"] for name, lab in labels.items())
    assert agree / len(labels) >= 0.95
