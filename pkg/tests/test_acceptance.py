"""Acceptance criteria, one test each, every one reporting a PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) or through pytest; in the
latter case the lines are repeated in the terminal summary.
"""

from __future__ import annotations

import hashlib
import io
import json
import random
import statistics
import sys
import time
from contextlib import redirect_stdout
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import numpy as np  # noqa: E402

from conftest import FIXTURE_FILES, FIXTURES  # noqa: E402
from designgen import random_comb_design  # noqa: E402
from refsim import comb_outputs, exhaustive_points, run_program  # noqa: E402
from rtlplan.cli import main as cli_main  # noqa: E402
from rtlplan.hdl import load, parse  # noqa: E402
from rtlplan.metrics import compute_metrics  # noqa: E402
from rtlplan.mutate import (  # noqa: E402
    ALL_TRANSFORMS, CATEGORIES, MutationError, MutationOperator, TreeConfig, apply_equivalence,
    apply_mutation, build_forest, enumerate_sites, transform_sites,
)
from rtlplan.pipeline import (  # noqa: E402
    EvalConfig, MockJudge, ScriptedPolicy, evaluate_all, iter_samples, parse_program, script_spec,
    spec_from_tree,
)
from rtlplan.reward import accepted_text, compute_reward, group_smu  # noqa: E402
from rtlplan.sim import Verdict, elaborate_sim, tick  # noqa: E402
from rtlplan.store import Manifest, RunConfig, tree_records  # noqa: E402
from rtlplan.validate import RandomStimulusConfig, compare  # noqa: E402

RESULTS: dict = {}
WORKER_COUNTS = (1, 4, 8)


def report(number: int, title: str, ok: bool, detail: str, seconds: float) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail}; {seconds:.2f}s)"
    RESULTS[number] = line
    print(line)


# -- 1. advantage anchors ---------------------------------------------------------------


def _cli_advantage(tmp: Path, method: str, rewards) -> list:
    f = tmp / f"{method}.txt"
    f.write_text(" ".join(str(r) for r in rewards) + "\n")
    buf = io.StringIO()
    with redirect_stdout(buf):
        assert cli_main(["advantage", "--method", method, str(f)]) == 0
    return [float(x) for x in buf.getvalue().split()]


def test_criterion_1_advantage_anchors(tmp_path):
    t0 = time.perf_counter()
    case1 = _cli_advantage(tmp_path, "loo", [1, 1, 1, 1, 1, 2, 1, 1])
    case2 = _cli_advantage(tmp_path, "loo", [1, 1, 1, 1, 1, 2, 0.8, 1])
    fixed = _cli_advantage(tmp_path, "smu", [1, 1, 1, 1, 1, 2, 1, 1])
    elapsed = time.perf_counter() - t0
    checks = [abs(a - (1.0 if i == 5 else -0.38)) <= 0.01 for i, a in enumerate(case1)]
    checks += [abs(case2[5] - 13.61) <= 0.02, abs(case2[6] + 0.91) <= 0.01]
    checks += [abs(case2[i] + 0.29) <= 0.01 for i in (0, 1, 2, 3, 4, 7)]
    checks += [abs(fixed[5] - 2.83) <= 0.01, elapsed < 1.0]
    ok = all(checks)
    report(1, "advantage anchors", ok, f"case1[5]={case1[5]:.4f} case2[5]={case2[5]:.4f} "
           f"case2[6]={case2[6]:.4f} fixed={fixed[5]:.4f}", elapsed)
    assert ok


# -- 2. reward fuzz -----------------------------------------------------------------------

ALPHABET = "abcXYZ 09{}_\t\n" + "éλ中\x07\x00"


def test_criterion_2_reward_fuzz():
    t0 = time.perf_counter()
    rng = random.Random(20240)
    failures = 0
    for _ in range(10_000):
        golden = Verdict(True) if rng.random() < 0.5 else Verdict(False, failing_step=rng.randrange(4))
        muts = [Verdict(True) if rng.random() < 0.5 else Verdict(False, failing_step=0)
                for _ in range(rng.randint(1, 8))]
        judge = rng.random() < 0.5
        text = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 12)))
        rv = compute_reward(golden, muts, judge, text)
        r_o = 1 if golden.passed else 0
        r_m = Fraction(sum(1 for v in muts if not v.passed), len(muts))
        clean = all(32 <= ord(c) <= 126 or c in "\t\n\r\f\v" for c in text)
        expect = r_o + r_o * r_m + (Fraction(4, 5) if judge else 0) + (Fraction(1, 5) if clean else 0)
        other = [Verdict(True) if rng.random() < 0.5 else Verdict(False, failing_step=1) for _ in muts]
        gated = golden.passed or compute_reward(golden, other, judge, text).total_exact == rv.total_exact
        if not (rv.total_exact == expect and 0 <= rv.total_exact <= 3 and rv.w_m == r_o and gated
                and accepted_text(text) == clean):
            failures += 1
    P, F = Verdict(True), Verdict(False, failing_step=0)
    examples = [
        compute_reward(F, [F] * 4, True, "plan").total_exact == 1,
        compute_reward(P, [F, F, P, P], True, "plan").total_exact == Fraction(5, 2),
        compute_reward(P, [F] * 4, True, "plan").total_exact == 3,
    ]
    ok = failures == 0 and all(examples)
    report(2, "reward model fuzz", ok, f"10000 tuples, {failures} failures, examples {sum(examples)}/3",
           time.perf_counter() - t0)
    assert ok


# -- 3. simulator oracle -----------------------------------------------------------------

SWAP = """module swap(input clk, input load, input [{m}:0] ia, input [{m}:0] ib,
                  output reg [{m}:0] a, output reg [{m}:0] b);
    always @(posedge clk) begin
        if (load) begin
            a <= ia;
            b <= ib;
        end else begin
            a <= b;
            b <= a;
        end
    end
endmodule
"""


def test_criterion_3_simulator_oracle():
    t0 = time.perf_counter()
    points = mismatched = 0
    designs = 0
    seed = 0
    while designs < 50:
        m = parse(random_comb_design(seed))
        seed += 1
        if sum(p.width for p in m.inputs) > 12:
            continue
        designs += 1
        pts = list(exhaustive_points([(p.name, p.width) for p in m.inputs]))
        sim = elaborate_sim(m, lanes=len(pts))
        sim.drive({p.name: np.array([pt[p.name] for pt in pts], dtype=np.uint64) for p in m.inputs})
        for k, pt in enumerate(pts):
            points += 1
            ref = comb_outputs(m, pt)
            mismatched += any(int(sim.get(name)[k]) != v for name, v in ref.items())
    rng = random.Random(7)
    designs_by_width = {}
    swap_fail = 0
    for _ in range(1000):
        w = rng.randint(1, 64)
        a0, b0 = rng.getrandbits(w), rng.getrandbits(w)
        design = designs_by_width.setdefault(w, parse(SWAP.format(m=w - 1)))
        sim = elaborate_sim(design)
        sim.drive({"ia": a0, "ib": b0, "load": 1})
        tick(sim, "clk")
        sim.drive({"load": 0})
        tick(sim, "clk")
        swap_fail += (int(sim.peek("a")), int(sim.peek("b"))) != (b0, a0)
    elapsed = time.perf_counter() - t0
    ok = mismatched == 0 and points > 0 and swap_fail == 0 and elapsed < 120
    report(3, "simulator oracle equivalence", ok,
           f"50 designs, {points} points, {mismatched} mismatches; 1000 swaps, {swap_fail} failures", elapsed)
    assert ok


# -- 4. mutation effectiveness ------------------------------------------------------------

VECTORS = RandomStimulusConfig(vectors=10_000)


def mutation_effectiveness(workers: int):
    designs = [(p.stem, load(p)) for p in FIXTURE_FILES]
    records = []
    for category in CATEGORIES:
        op = MutationOperator(category)
        hit = None
        for name, m in designs:
            for site in enumerate_sites(m, op):
                try:
                    child, rec = apply_mutation(m, op, site, 0)
                except MutationError:
                    continue
                r = compare(m, child, VECTORS, workers=workers)
                if r.classification == "mutated":
                    hit = {"type": "mutation", "category": category, "design": name,
                           "record": rec.to_dict(), "report": r.to_dict()}
                    break
            if hit:
                break
        records.append(hit or {"type": "mutation", "category": category, "design": None})
    for t in ALL_TRANSFORMS:
        for name, m in designs:
            if not transform_sites(m, t):
                continue
            child, rec = apply_equivalence(m, t, 0)
            r = compare(m, child, VECTORS, workers=workers)
            records.append({"type": "equivalence", "transform": t.name, "design": name,
                            "record": rec.to_dict(), "report": r.to_dict()})
    config = RunConfig(validation=VECTORS).to_dict()
    return Manifest("effectiveness", records, config).dumps()


@lru_cache(maxsize=None)
def effectiveness_manifest(workers: int) -> str:
    return mutation_effectiveness(workers)


def test_criterion_4_mutation_effectiveness():
    t0 = time.perf_counter()
    recs = [json.loads(line) for line in effectiveness_manifest(1).splitlines()[1:]]
    elapsed = time.perf_counter() - t0
    covered = [r for r in recs if r["type"] == "mutation" and r["design"]]
    equivs = [r for r in recs if r["type"] == "equivalence"]
    unclean = [f"{r['transform']}@{r['design']}" for r in equivs if r["report"]["classification"] != "clean"]
    applied = {r["transform"] for r in equivs}
    ok = (len(FIXTURE_FILES) >= 20 and len(covered) == 14 and not unclean
          and applied == {t.name for t in ALL_TRANSFORMS} and elapsed < 300)
    report(4, "mutation effectiveness", ok, f"{len(FIXTURE_FILES)} fixtures, {len(covered)}/14 categories mutated, "
           f"{len(equivs) - len(unclean)}/{len(equivs)} equivalents clean over {len(applied)} transforms", elapsed)
    assert ok


# -- 5. tree shape -----------------------------------------------------------------------

TREE_CFG = TreeConfig(n_equivalents=5, n_level1=3, max_depth=1, seed=0)


def _forest(workers: int):
    return build_forest([load(p) for p in FIXTURE_FILES], TREE_CFG, workers=workers)


@lru_cache(maxsize=None)
def tree_manifest(workers: int) -> str:
    run = RunConfig(seed=TREE_CFG.seed, tree=TREE_CFG, validation=TREE_CFG.stimulus())
    return Manifest("tree", tree_records(_forest(workers)), run.to_dict()).dumps()


def test_criterion_5_tree_shape():
    t0 = time.perf_counter()
    trees = _forest(1)
    bound = all(len(t.nodes) <= 1 + 5 + 15 for t in trees)
    violations = [v for t in trees for v in t.violations()]
    replay = _forest(1)
    same = [a.fingerprints() == b.fingerprints() for a, b in zip(trees, replay)]
    elapsed = time.perf_counter() - t0
    ok = bound and not violations and all(same) and len(trees) == len(FIXTURE_FILES)
    report(5, "tree shape", ok, f"{len(trees)} trees, {sum(len(t.nodes) for t in trees)} nodes, "
           f"{len(violations)} violations, replay identical {sum(same)}/{len(same)}", elapsed)
    assert ok


# -- 6. diversified-group variance -------------------------------------------------------


def _oracle(mutation_id: str) -> float:
    """Deterministic reward in [0, 3], distinct across mutation ids with overwhelming probability."""
    return 3 * int(hashlib.sha256(mutation_id.encode()).hexdigest()[:12], 16) / 16**12


def _group_sd(oracle, g: int = 8, groups: int = 100):
    samples = [(f"base{b}", f"base{b}/mut{j}", oracle(f"base{b}/mut{j}")) for b in range(groups) for j in range(g)]
    smu = [statistics.pstdev(grp.rewards) for grp in group_smu(samples)]
    # fixed-state grouping: G actions sampled on one state (the first mutation of each base)
    fixed = [statistics.pstdev([oracle(f"base{b}/mut0")] * g) for b in range(groups)]
    return statistics.mean(smu), statistics.mean(fixed)


def test_criterion_6_smu_variance():
    t0 = time.perf_counter()
    smu, fixed = _group_sd(_oracle)
    c_smu, c_fixed = _group_sd(lambda _: 1.5)
    ok = smu > fixed and c_smu >= c_fixed
    report(6, "diversified-group variance", ok, f"mean sd smu={smu:.4f} fixed={fixed:.4f}; "
           f"constant oracle smu={c_smu:.1f} fixed={c_fixed:.1f}", time.perf_counter() - t0)
    assert ok


# -- 7. end-to-end pipeline ---------------------------------------------------------------

PIPELINE_DESIGNS = ("accumulator", "adder4", "alu4", "and_or_explicit", "bcd_counter",
                    "bitmux", "byte_split", "comparator", "counter", "decoder")
GOOD = set(PIPELINE_DESIGNS[:4])


@lru_cache(maxsize=None)
def pipeline_inputs():
    cfg = TreeConfig(n_equivalents=0, n_level1=3, max_depth=1, seed=0)
    trees = build_forest([load(FIXTURES / f"{n}.v") for n in PIPELINE_DESIGNS], cfg)
    specs = tuple(spec_from_tree(t, f"The {t.name} module from the bundled corpus.") for t in trees)
    policy = ScriptedPolicy()
    for s in specs:
        script_spec(policy, s, s.id in GOOD)
    return specs, policy


def pipeline_manifest(workers: int):
    """(manifest text, records) for one evaluation run."""
    specs, policy = pipeline_inputs()
    cfg = EvalConfig(workers=workers)
    records = evaluate_all(specs, policy, MockJudge(), cfg)
    return Manifest("eval_record", [r.to_dict() for r in records], {"eval": cfg.to_dict()}).dumps(), records


def test_criterion_7_pipeline():
    t0 = time.perf_counter()
    specs, policy = pipeline_inputs()
    text, records = pipeline_manifest(1)
    again, _ = pipeline_manifest(1)
    report_ = compute_metrics(records)
    # oracle: re-run each scripted program on the scalar reference scheduler
    detected = 0
    for (spec, mutation), rec in zip(iter_samples(specs), records):
        prog = parse_program(rec.artifacts["program_text"])
        g_ok, _ = run_program(spec.golden_ast(), prog)
        m_ok, _ = run_program(parse(mutation.code), prog)
        detected += g_ok and not m_ok
    oracle_m2 = detected / len(records)
    elapsed = time.perf_counter() - t0
    ok = (len(specs) == 10 and len(records) == 30 and report_.m1 == 0.4 and report_.m2 == oracle_m2
          and text == again and elapsed < 120)
    report(7, "end-to-end pipeline", ok, f"{len(specs)} specs, {len(records)} samples, m1={report_.m1}, "
           f"m2={report_.m2:.4f} oracle={oracle_m2:.4f}, rerun identical {text == again}", elapsed)
    assert ok


# -- 8. determinism sweep ---------------------------------------------------------------


def test_criterion_8_determinism_sweep():
    t0 = time.perf_counter()
    digests = {}
    for name, make in (("effectiveness", effectiveness_manifest), ("tree", tree_manifest),
                       ("pipeline", lambda w: pipeline_manifest(w)[0])):
        digests[name] = {w: hashlib.sha256(make(w).encode()).hexdigest()[:12] for w in WORKER_COUNTS}
    same = {name: len(set(d.values())) == 1 for name, d in digests.items()}
    ok = all(same.values())
    detail = ", ".join(f"{n} {'identical' if s else 'DIFFERENT'} {digests[n][1]}" for n, s in same.items())
    report(8, "determinism sweep (1/4/8 workers)", ok, detail, time.perf_counter() - t0)
    assert ok


if __name__ == "__main__":
    import tempfile

    tests = [(test_criterion_1_advantage_anchors, True)] + [
        (f, False) for f in (test_criterion_2_reward_fuzz, test_criterion_3_simulator_oracle,
                             test_criterion_4_mutation_effectiveness, test_criterion_5_tree_shape,
                             test_criterion_6_smu_variance, test_criterion_7_pipeline,
                             test_criterion_8_determinism_sweep)]
    failed = 0
    for fn, needs_tmp in tests:
        try:
            if needs_tmp:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
