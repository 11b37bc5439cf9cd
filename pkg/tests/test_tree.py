from __future__ import annotations

import pytest

from rtlplan.hdl import parse
from rtlplan.hdl.elaborate import elaborate
from rtlplan.mutate import MutationOperator, TreeConfig, build_forest, build_tree, replay_tree, verify_provenance
from rtlplan.store import tree_records, trees_from_records


def _check_kinds(tree):
    for n in tree.nodes.values():
        if n.kind == "equivalent":
            assert n.validation.mismatches == 0
        elif n.kind == "mutation":
            assert n.validation.mismatches > 0


def test_minimal_counter_tree(fixture):
    tree = build_tree(fixture("counter"), TreeConfig(n_equivalents=1, n_level1=1, max_depth=1, vectors_per_validation=2000))
    s = tree.stats()
    assert (s["base"], s["equivalents"]) == (1, 1) and s["level1"] >= 1
    _check_kinds(tree)
    assert tree.violations() == []


def test_node_bound(fixture):
    cfg = TreeConfig(n_equivalents=5, n_level1=3, max_depth=1, vectors_per_validation=1000)
    tree = build_tree(fixture("traffic"), cfg)
    s = tree.stats()
    assert s["equivalents"] <= 5 and s["level1"] <= 15 and s["nodes"] <= 21
    assert tree.violations() == []


def test_depth_two_parenting(fixture):
    cfg = TreeConfig(n_equivalents=1, n_level1=2, max_depth=2, n_level2=1, vectors_per_validation=1000)
    tree = build_tree(fixture("accumulator"), cfg)
    level2 = [n for n in tree.nodes.values() if n.level == 2]
    assert level2
    for n in level2:
        assert tree.nodes[n.parent_id].level == 1
    pool = {op.category for op in cfg.level2_operator_pool}
    assert {n.record.operator.category for n in level2} <= pool
    assert tree.violations() == []


def test_every_node_parses(fixture):
    tree = build_tree(fixture("seq_detect"), TreeConfig(n_equivalents=2, n_level1=2, max_depth=1,
                                                        vectors_per_validation=1000))
    for n in tree.nodes.values():
        elaborate(parse(n.code))


def test_replay_and_provenance(fixture):
    cfg = TreeConfig(n_equivalents=2, n_level1=2, max_depth=1, vectors_per_validation=1000, seed=4)
    tree = build_tree(fixture("lfsr8"), cfg)
    assert verify_provenance(tree) == []
    assert replay_tree(tree)
    assert build_tree(fixture("lfsr8"), cfg).fingerprints() == tree.fingerprints()


def test_shortfall_recorded(fixture):
    tree = build_tree(fixture("inverter"), TreeConfig(n_equivalents=0, n_level1=3, max_depth=1,
                                                      vectors_per_validation=200))
    assert tree.stats()["level1"] < 3
    assert tree.shortfalls


def test_forest_matches_single_builds_and_round_trips(fixture):
    cfg = TreeConfig(n_equivalents=1, n_level1=2, max_depth=1, vectors_per_validation=500)
    designs = [fixture("gates"), fixture("toggle")]
    forest = build_forest(designs, cfg, workers=2)
    assert [t.fingerprints() for t in forest] == [build_tree(d, cfg).fingerprints() for d in designs]
    back = trees_from_records(tree_records(forest), cfg)
    assert [t.name for t in back] == ["gates", "toggle"]
    assert tree_records(back) == tree_records(forest)


def test_config_validation():
    with pytest.raises(ValueError):
        TreeConfig(max_depth=0)
    cfg = TreeConfig(level2_operator_pool=(MutationOperator("operator_swap"),))
    assert TreeConfig.from_dict(cfg.to_dict()) == cfg
