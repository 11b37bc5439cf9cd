"""Golden pass rate (M1), mutation detection rate (M2), and benchmark reports."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .hdl import ModuleDecl, classify
from .reward import RewardVector
from .sim import Verdict

CIRCUIT_TYPES = ("combinational", "sequential")


def classify_circuit(m: ModuleDecl) -> str:
    """Sequential iff some always block has an edge-triggered sensitivity entry."""
    return classify(m)


@dataclass(frozen=True)
class EvalRecord:
    spec_id: str
    mutation_id: str
    golden_verdict: Verdict
    mutation_verdict: Verdict
    reward: RewardVector
    circuit_type: str
    mutation_category: Optional[str] = None
    flags: Tuple[str, ...] = ()
    artifacts: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.circuit_type not in CIRCUIT_TYPES:
            raise ValueError(f"circuit_type must be one of {CIRCUIT_TYPES}")

    @property
    def golden_pass(self) -> bool:
        return self.golden_verdict.passed

    @property
    def detected(self) -> bool:
        """The M2 condition: golden passes and the mutant fails the same program."""
        return self.golden_verdict.passed and not self.mutation_verdict.passed

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "mutation_id": self.mutation_id,
            "golden_verdict": self.golden_verdict.to_dict(),
            "mutation_verdict": self.mutation_verdict.to_dict(),
            "reward": self.reward.to_dict(),
            "circuit_type": self.circuit_type,
            "mutation_category": self.mutation_category,
            "flags": list(self.flags),
            "artifacts": dict(sorted(self.artifacts.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalRecord":
        return cls(
            d["spec_id"], d["mutation_id"], Verdict.from_dict(d["golden_verdict"]),
            Verdict.from_dict(d["mutation_verdict"]), RewardVector.from_dict(d["reward"]),
            d["circuit_type"], d.get("mutation_category"), tuple(d.get("flags", ())),
            dict(d.get("artifacts", {})),
        )


@dataclass(frozen=True)
class Tally:
    n: int = 0
    golden_pass: int = 0
    detected: int = 0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(self.n + other.n, self.golden_pass + other.golden_pass, self.detected + other.detected)

    @classmethod
    def of(cls, r: EvalRecord) -> "Tally":
        return cls(1, int(r.golden_pass), int(r.detected))

    @property
    def m1(self) -> Fraction:
        return Fraction(self.golden_pass, self.n) if self.n else Fraction(0)

    @property
    def m2(self) -> Fraction:
        return Fraction(self.detected, self.n) if self.n else Fraction(0)

    def to_dict(self) -> dict:
        return {"n": self.n, "golden_pass": self.golden_pass, "detected": self.detected,
                "m1": float(self.m1), "m2": float(self.m2)}


@dataclass(frozen=True)
class Summary:
    """Overall, per-circuit-type, and per-category tallies; merges associatively."""

    total: Tally = Tally()
    by_type: Tuple[Tuple[str, Tally], ...] = ()
    by_category: Tuple[Tuple[str, Tally], ...] = ()

    @staticmethod
    def _merge(a, b) -> Tuple[Tuple[str, Tally], ...]:
        out: Dict[str, Tally] = dict(a)
        for k, t in b:
            out[k] = out.get(k, Tally()) + t
        return tuple(sorted(out.items()))

    def __add__(self, other: "Summary") -> "Summary":
        return Summary(self.total + other.total, self._merge(self.by_type, other.by_type),
                       self._merge(self.by_category, other.by_category))

    @classmethod
    def of(cls, r: EvalRecord) -> "Summary":
        t = Tally.of(r)
        return cls(t, ((r.circuit_type, t),), ((r.mutation_category or "unknown", t),))


@dataclass(frozen=True)
class BenchmarkReport:
    m1: float
    m2: float
    n: int
    golden_pass: int
    detected: int
    by_circuit_type: Dict[str, dict]
    by_category: Dict[str, dict]
    config_fingerprint: str
    records_fingerprint: str

    def __post_init__(self):
        if not 0 <= self.m2 <= self.m1 <= 1:
            raise ValueError("report must satisfy 0 <= m2 <= m1 <= 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def table(self) -> str:
        rows = [("all", self.n, self.m1, self.m2)]
        rows += [(f"type:{k}", v["n"], v["m1"], v["m2"]) for k, v in self.by_circuit_type.items()]
        rows += [(f"category:{k}", v["n"], v["m1"], v["m2"]) for k, v in self.by_category.items()]
        width = max(len(r[0]) for r in rows)
        out = [f"{'group':<{width}}  {'n':>5}  {'golden pass %':>13}  {'detected %':>10}"]
        for name, n, m1, m2 in rows:
            out.append(f"{name:<{width}}  {n:>5}  {100 * m1:>13.1f}  {100 * m2:>10.1f}")
        return "\n".join(out)


def _fingerprint(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def summarize(records: Iterable[EvalRecord]) -> Summary:
    s = Summary()
    for r in records:
        s = s + Summary.of(r)
    return s


def compute_metrics(records: Sequence[EvalRecord], config: Optional[dict] = None) -> BenchmarkReport:
    records = list(records)
    if not records:
        raise ValueError("compute_metrics needs at least one record")
    s = summarize(records)
    return BenchmarkReport(
        m1=float(s.total.m1),
        m2=float(s.total.m2),
        n=s.total.n,
        golden_pass=s.total.golden_pass,
        detected=s.total.detected,
        by_circuit_type={k: t.to_dict() for k, t in s.by_type},
        by_category={k: t.to_dict() for k, t in s.by_category},
        config_fingerprint=_fingerprint(config) if config is not None else "",
        records_fingerprint=_fingerprint([r.to_dict() for r in records]),
    )


__all__ = [
    "BenchmarkReport", "CIRCUIT_TYPES", "EvalRecord", "Summary", "Tally", "classify_circuit",
    "compute_metrics", "summarize",
]
