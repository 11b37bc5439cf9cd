"""Command-line entry point: ``rtlplan <command> ...``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from typing import Iterable, List, Optional, Sequence

from . import __version__, reward
from .hdl import HdlError, SourceUnit, ast_fingerprint, classify, emit, parse
from .metrics import EvalRecord, compute_metrics
from .mutate import (
    ALL_TRANSFORMS, CATEGORIES, EquivalenceTransform, MutationError, MutationOperator, TreeConfig,
    apply_equivalence, apply_mutation, build_forest, enumerate_sites, replay_tree, transform_sites,
    verify_provenance,
)
from .pipeline import (
    BackendError, ChatClient, ConstantJudge, EvalConfig, HttpJudge, HttpPolicy, MockJudge,
    ProgramParseError, ScriptedPolicy, SpecRecord, curate_sft, evaluate_all, parse_program,
    script_spec, spec_from_tree,
)
from .sim import SimulationError, Verdict, run_stimulus
from .store import (
    BackendConfig, Manifest, ManifestError, RunConfig, canonical_json, fingerprint, read_manifest,
    tree_records, trees_from_records, write_manifest,
)
from .validate import InterfaceError, RandomStimulusConfig, compare

EXPECTED_ERRORS = (HdlError, MutationError, ManifestError, ProgramParseError, InterfaceError,
                   SimulationError, BackendError, ValueError, KeyError, OSError)


class CliError(Exception):
    pass


def _load(path: str):
    with open(path, encoding="utf-8") as f:
        return parse(SourceUnit(f.read(), path))


def _out(text: str, path: Optional[str]) -> None:
    if path and path != "-":
        with open(path, "w", encoding="utf-8") as f:
            f.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _input_lines(path: Optional[str]) -> List[str]:
    if path is None or path == "-":
        return sys.stdin.read().splitlines()
    with open(path, encoding="utf-8") as f:
        return f.read().splitlines()


# -- hdl / sim -----------------------------------------------------------------------


def cmd_parse(args) -> int:
    m = _load(args.file)
    if args.emit:
        _out(emit(m, args.file).text, None)
        return 0
    info = {
        "module": m.name,
        "ports": [{"name": p.name, "direction": p.direction, "width": p.width} for p in m.ports],
        "params": {p.name: p.value.bits for p in m.params},
        "nets": [{"name": n.name, "kind": n.kind, "width": n.width} for n in m.nets],
        "assigns": len(m.assigns),
        "blocks": len(m.blocks),
        "circuit_type": classify(m),
        "fingerprint": ast_fingerprint(m),
    }
    if args.json:
        _print_json(info)
    else:
        ports = ", ".join(f"{p['direction']} {p['name']}[{p['width']}]" for p in info["ports"])
        print(f"{m.name}: {info['circuit_type']}, {ports}")
        print(f"fingerprint {info['fingerprint']}")
    return 0


def cmd_sim(args) -> int:
    design = _load(args.design)
    with open(args.program, encoding="utf-8") as f:
        program = parse_program(f.read())
    trace: Optional[list] = [] if args.trace else None
    verdict = run_stimulus(design, program, trace=trace, delta_limit=args.delta_limit)
    if trace is not None:
        for rec in trace:
            print(canonical_json(rec))
    _print_json(verdict.to_dict())
    return 0 if verdict.passed else 3


# -- mutation / equivalence ----------------------------------------------------------


def cmd_mutate(args) -> int:
    m = _load(args.design)
    if args.list:
        for cat in CATEGORIES:
            sites = enumerate_sites(m, MutationOperator(cat))
            print(f"{cat}: {len(sites)} site(s)")
        return 0
    op = MutationOperator.parse(args.operator)
    sites = enumerate_sites(m, op)
    if not sites:
        raise CliError(f"{op.name} has no sites in {m.name}")
    if not 0 <= args.site < len(sites):
        raise CliError(f"--site must lie in 0..{len(sites) - 1}")
    child, record = apply_mutation(m, op, sites[args.site], args.seed)
    _out(emit(child).text, args.output)
    print(canonical_json(record.to_dict()), file=sys.stderr)
    return 0


def cmd_equiv(args) -> int:
    m = _load(args.design)
    if args.list:
        for t in ALL_TRANSFORMS:
            print(f"{t.name}: {len(transform_sites(m, t))} site(s)")
        return 0
    t = EquivalenceTransform.parse(args.transform)
    child, record = apply_equivalence(m, t, args.seed)
    _out(emit(child).text, args.output)
    print(canonical_json(record.to_dict()), file=sys.stderr)
    return 0


def _stimulus_cfg(args) -> RandomStimulusConfig:
    return RandomStimulusConfig(
        vectors=args.vectors, cycles_per_vector=args.cycles, reset_toggle_probability=args.reset_prob,
        input_distribution=args.distribution, seed=args.seed,
        mismatch_cap=None if args.full_count else args.mismatch_cap,
    )


def cmd_validate(args) -> int:
    cfg = _stimulus_cfg(args)
    report = compare(_load(args.golden), _load(args.candidate), cfg, workers=args.workers)
    out = report.to_dict()
    out["config_fingerprint"] = RunConfig(seed=args.seed, validation=cfg).fingerprint()
    _print_json(out)
    return 0


# -- trees ---------------------------------------------------------------------------


def _tree_cfg(args) -> TreeConfig:
    return TreeConfig(n_equivalents=args.n, n_level1=args.n1, max_depth=args.depth, n_level2=args.n2,
                      vectors_per_validation=args.vectors, seed=args.seed)


def _tree_manifest(trees, cfg: TreeConfig) -> Manifest:
    run = RunConfig(seed=cfg.seed, tree=cfg, validation=cfg.stimulus())
    return Manifest("tree", tree_records(trees), run.to_dict())


def cmd_tree_build(args) -> int:
    cfg = _tree_cfg(args)
    designs = [_load(p) for p in args.golden]
    trees = build_forest(designs, cfg, workers=args.workers)
    write_manifest(args.output, _tree_manifest(trees, cfg))
    for t in trees:
        s = t.stats()
        print(f"{t.name}: {s['nodes']} nodes ({s['equivalents']} equivalent, {s['level1']} level-1, "
              f"{s['level2']} level-2), {s['shortfalls']} shortfall(s)", file=sys.stderr)
    return 0


def _read_trees(path: str):
    man = read_manifest(path, "tree")
    if man.config is None:
        raise CliError(f"{path}: tree manifest has no config")
    cfg = RunConfig.from_dict(man.config).tree
    return trees_from_records(man.records, cfg), cfg


def cmd_tree_stats(args) -> int:
    trees, _ = _read_trees(args.manifest)
    rows = [t.stats() for t in trees]
    totals = {k: sum(r[k] for r in rows) for k in ("base", "equivalents", "level1", "level2", "deeper",
                                                     "nodes", "shortfalls")}
    if args.json:
        _print_json({"trees": rows, "total": totals})
        return 0
    print(f"{'design':<16} {'base':>4} {'equiv':>5} {'lvl1':>5} {'lvl2':>5} {'nodes':>5} {'short':>5}")
    for r in rows + [dict(totals, name="TOTAL")]:
        print(f"{r['name']:<16} {r['base']:>4} {r['equivalents']:>5} {r['level1']:>5} "
              f"{r['level2']:>5} {r['nodes']:>5} {r['shortfalls']:>5}")
    return 0


def cmd_tree_replay(args) -> int:
    trees, _ = _read_trees(args.manifest)
    ok = True
    for t in trees:
        bad = verify_provenance(t)
        same = replay_tree(t, workers=args.workers)
        problems = t.violations()
        status = "ok" if not bad and same and not problems else "MISMATCH"
        ok &= status == "ok"
        print(f"{t.name}: {status} (provenance failures {len(bad)}, rebuild identical {same}, "
              f"violations {len(problems)})")
    return 0 if ok else 4


# -- reward / advantage ----------------------------------------------------------------


def _reward_input(obj: dict) -> reward.RewardVector:
    golden = Verdict(True) if obj["golden_passed"] else Verdict(False, failing_step=0)
    muts = [Verdict(True) if p else Verdict(False, failing_step=0) for p in obj["mutation_passed"]]
    return reward.compute_reward(golden, muts, bool(obj.get("judge_ok", False)), obj.get("plan_text", ""))


def cmd_reward_compute(args) -> int:
    for lineno, line in enumerate(_input_lines(args.file), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CliError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        print(canonical_json(_reward_input(obj).to_dict()))
    return 0


_NUMBER_SPLIT = re.compile(r"[\s,\[\]]+")


def parse_reward_line(line: str) -> List[float]:
    return [float(tok) for tok in _NUMBER_SPLIT.split(line.strip()) if tok]


def cmd_advantage(args) -> int:
    method = reward.METHOD_ALIASES[args.method]
    for line in _input_lines(args.file):
        if not line.strip():
            continue
        adv = reward.advantages(parse_reward_line(line), method, args.epsilon_sigma)
        if args.json:
            print(json.dumps(adv))
        else:
            print(" ".join(f"{a:.{args.digits}f}" for a in adv))
    return 0


# -- pipeline / metrics ----------------------------------------------------------------


def _labels(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    out = {}
    for k, v in raw.items():
        out[k[:-2] if k.endswith(".v") else k] = v
    return out


def cmd_pipeline_specs(args) -> int:
    trees, _ = _read_trees(args.tree)
    labels = _labels(args.labels)
    specs = []
    for t in trees:
        if t.name not in labels:
            raise CliError(f"no description for design '{t.name}' in {args.labels}")
        lab = labels[t.name]
        specs.append(spec_from_tree(t, lab["description"], circuit_type=lab.get("type")).to_dict())
    write_manifest(args.output, Manifest("spec", specs, {"tree_manifest": fingerprint(read_manifest(args.tree).records)}))
    return 0


def _read_specs(path: str) -> List[SpecRecord]:
    return [SpecRecord.from_dict(r) for r in read_manifest(path, "spec").records]


def cmd_pipeline_script(args) -> int:
    specs = _read_specs(args.specs)
    good = set(args.good.split(",")) if args.good else {s.id for s in specs[:args.good_count]}
    policy = ScriptedPolicy()
    for s in specs:
        script_spec(policy, s, s.id in good, steps=args.steps, seed=args.seed)
    _out(json.dumps(policy.to_dict(), indent=1, sort_keys=True), args.output)
    return 0


def _backends(args):
    if args.script:
        with open(args.script, encoding="utf-8") as f:
            policy = ScriptedPolicy.from_dict(json.load(f))
        policy_id = {"kind": "scripted", "script": fingerprint(policy.to_dict())}
        backend = BackendConfig()
    elif args.endpoint:
        backend = BackendConfig(args.endpoint, args.model, args.api_key_env, args.retries)
        policy = HttpPolicy(ChatClient(args.endpoint, args.model, args.api_key_env, args.retries))
        policy_id = {"kind": "http", **backend.to_dict()}
    else:
        raise CliError("give --script for a scripted policy or --endpoint/--model for an HTTP one")
    if args.judge == "mock":
        judge = MockJudge()
    elif args.judge in ("accept", "reject"):
        judge = ConstantJudge(args.judge == "accept")
    else:
        if not args.endpoint:
            raise CliError("--judge http needs --endpoint")
        judge = HttpJudge(ChatClient(args.endpoint, args.judge_model or args.model, args.api_key_env, args.retries))
    return policy, judge, {"policy": policy_id, "judge": args.judge, "backend": backend.to_dict()}


def cmd_pipeline_eval(args) -> int:
    specs = _read_specs(args.specs)
    policy, judge, ident = _backends(args)
    cfg = EvalConfig(workers=args.workers)
    records = evaluate_all(specs, policy, judge, cfg)
    config = dict(ident, eval=cfg.to_dict(), specs=fingerprint([s.to_dict() for s in specs]))
    write_manifest(args.output, Manifest("eval_record", [r.to_dict() for r in records], config))
    report = compute_metrics(records, config)
    print(f"{len(records)} records: golden pass {100 * report.m1:.1f}%, detected {100 * report.m2:.1f}%",
          file=sys.stderr)
    return 0


def cmd_pipeline_curate(args) -> int:
    specs = _read_specs(args.specs)
    policy, judge, ident = _backends(args)
    cfg = EvalConfig(workers=args.workers)
    pairs = curate_sft(specs, policy, judge, cfg)
    config = dict(ident, eval=cfg.to_dict(), specs=fingerprint([s.to_dict() for s in specs]))
    write_manifest(args.output, Manifest("sft_pair", [p.to_dict() for p in pairs], config))
    print(f"accepted {len(pairs)} pair(s)", file=sys.stderr)
    return 0


def cmd_metrics_report(args) -> int:
    man = read_manifest(args.records, "eval_record")
    records = [EvalRecord.from_dict(r) for r in man.records]
    report = compute_metrics(records, man.config)
    if args.json:
        _print_json(report.to_dict())
    else:
        print(report.table())
        print(f"config {report.config_fingerprint or '-'}  records {report.records_fingerprint}")
    return 0


# -- parser construction -------------------------------------------------------------


def _add_stimulus_flags(p: argparse.ArgumentParser) -> None:
    d = RandomStimulusConfig()
    p.add_argument("--vectors", type=int, default=d.vectors, help="random stimulus vectors (default %(default)s)")
    p.add_argument("--cycles", type=int, default=d.cycles_per_vector, help="cycles per vector")
    p.add_argument("--reset-prob", type=float, default=d.reset_toggle_probability,
                   help="per-cycle reset toggle probability")
    p.add_argument("--distribution", choices=("uniform", "biased-corner"), default=d.input_distribution)
    p.add_argument("--mismatch-cap", type=int, default=d.mismatch_cap, help="stop after this many mismatches")
    p.add_argument("--full-count", action="store_true", help="count every mismatch (no early exit)")


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--specs", required=True, help="spec manifest (see 'pipeline specs')")
    p.add_argument("--script", help="scripted policy JSON (offline mock)")
    p.add_argument("--endpoint", help="chat-completion endpoint URL")
    p.add_argument("--model", help="model name sent to the endpoint")
    p.add_argument("--api-key-env", default="RTLPLAN_API_KEY", help="environment variable holding the API key")
    p.add_argument("--retries", type=int, default=2, help="transport retries (default %(default)s)")
    p.add_argument("--judge", choices=("mock", "accept", "reject", "http"), default="mock")
    p.add_argument("--judge-model", help="model for --judge http (defaults to --model)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rtlplan", description=__doc__)
    ap.add_argument("--version", action="version", version=f"rtlplan {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("parse", help="parse and elaborate a MiniRTL file")
    p.add_argument("file")
    p.add_argument("--emit", action="store_true", help="print canonical source")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("sim", help="run a stimulus/v1 program against a design")
    p.add_argument("--design", required=True)
    p.add_argument("--program", required=True)
    p.add_argument("--trace", action="store_true", help="dump per-step output records")
    p.add_argument("--delta-limit", type=int, default=1000)
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("mutate", help="apply one mutation operator")
    p.add_argument("--design", required=True)
    p.add_argument("--operator", help="category or category:variant")
    p.add_argument("--site", type=int, default=0, help="index into the operator's site list")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--list", action="store_true", help="list site counts per category")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_mutate)

    p = sub.add_parser("equiv", help="apply one equivalence transform")
    p.add_argument("--design", required=True)
    p.add_argument("--transform", help="category or category:variant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--list", action="store_true", help="list site counts per transform")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_equiv)

    p = sub.add_parser("validate", help="compare a candidate with its golden under random stimulus")
    p.add_argument("--golden", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_stimulus_flags(p)
    p.set_defaults(fn=cmd_validate)

    tree = sub.add_parser("tree", help="build, summarize, or replay mutation trees")
    tsub = tree.add_subparsers(dest="tree_command", metavar="action")
    tsub.required = True
    p = tsub.add_parser("build", help="grow validated trees from golden designs")
    p.add_argument("--golden", required=True, nargs="+")
    p.add_argument("--n", type=int, default=5, help="equivalents per design")
    p.add_argument("--n1", type=int, default=3, help="level-1 mutants per root")
    p.add_argument("--depth", type=int, default=1, help="maximum mutation depth")
    p.add_argument("--n2", type=int, default=1, help="children per mutant below level 1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vectors", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_tree_build)
    p = tsub.add_parser("stats", help="per-design node counts")
    p.add_argument("manifest")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_tree_stats)
    p = tsub.add_parser("replay", help="check provenance and rebuild from the stored config")
    p.add_argument("manifest")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_tree_replay)

    rw = sub.add_parser("reward", help="composite reward")
    rsub = rw.add_subparsers(dest="reward_command", metavar="action")
    rsub.required = True
    p = rsub.add_parser("compute", help="score JSON lines of {golden_passed, mutation_passed, judge_ok, plan_text}")
    p.add_argument("file", nargs="?", help="input file (default: standard input)")
    p.set_defaults(fn=cmd_reward_compute)

    p = sub.add_parser("advantage", help="group-relative advantages, one reward group per line")
    p.add_argument("file", nargs="?", help="input file (default: standard input)")
    p.add_argument("--method", choices=tuple(reward.METHOD_ALIASES), default="whole")
    p.add_argument("--epsilon-sigma", type=float, default=reward.EPS_SIGMA)
    p.add_argument("--digits", type=int, default=4)
    p.add_argument("--json", action="store_true", help="full-precision JSON arrays")
    p.set_defaults(fn=cmd_advantage)

    pl = sub.add_parser("pipeline", help="two-stage test-plan evaluation")
    psub = pl.add_subparsers(dest="pipeline_command", metavar="action")
    psub.required = True
    p = psub.add_parser("specs", help="turn a tree manifest and labels into evaluation specs")
    p.add_argument("--tree", required=True)
    p.add_argument("--labels", required=True, help="JSON mapping design file to {type, description}")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_pipeline_specs)
    p = psub.add_parser("script", help="write a scripted mock policy for a spec manifest")
    p.add_argument("--specs", required=True)
    p.add_argument("--good", help="comma-separated spec ids that get golden-passing programs")
    p.add_argument("--good-count", type=int, default=0, help="or: the first N specs")
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_pipeline_script)
    p = psub.add_parser("eval", help="evaluate every (spec, mutation) sample")
    _add_backend_flags(p)
    p.set_defaults(fn=cmd_pipeline_eval)
    p = psub.add_parser("curate", help="keep samples that pass golden and fail the mutant")
    _add_backend_flags(p)
    p.set_defaults(fn=cmd_pipeline_curate)

    mt = sub.add_parser("metrics", help="benchmark metrics")
    msub = mt.add_subparsers(dest="metrics_command", metavar="action")
    msub.required = True
    p = msub.add_parser("report", help="golden pass / detection rates for an eval-record manifest")
    p.add_argument("records")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_metrics_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"rtlplan: error: {exc}", file=sys.stderr)
        return 1
    except EXPECTED_ERRORS as exc:
        print(f"rtlplan: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0


def cli_dispatch(argv: Iterable[str]) -> int:
    """``main`` that also turns usage errors into an exit code instead of raising SystemExit."""
    try:
        return main(list(argv))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
