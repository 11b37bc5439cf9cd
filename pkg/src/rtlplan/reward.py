"""Composite test-plan reward, group-relative advantages, and the clipped objective."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple

from .sim.program import Verdict

R_OUTPUT = 1
R_JUDGE = Fraction(4, 5)
R_CHARSET = Fraction(1, 5)
EPS_SIGMA = 1e-8
METHODS = ("whole_group", "leave_one_out", "smu_fixed")
METHOD_ALIASES = {"whole": "whole_group", "loo": "leave_one_out", "smu": "smu_fixed"}


@dataclass(frozen=True)
class RewardVector:
    r_o: int
    r_m: Fraction
    r_j: Fraction
    r_c: Fraction
    w_m: int

    def __post_init__(self):
        if self.w_m != self.r_o:
            raise ValueError("w_m must equal r_o")

    @property
    def total_exact(self) -> Fraction:
        return self.r_o + self.w_m * self.r_m + self.r_j + self.r_c

    @property
    def total(self) -> float:
        return float(self.total_exact)

    def to_dict(self) -> dict:
        return {
            "r_o": self.r_o, "r_m": float(self.r_m), "r_m_exact": str(self.r_m),
            "r_j": float(self.r_j), "r_c": float(self.r_c), "w_m": self.w_m, "total": self.total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardVector":
        r_m = Fraction(d["r_m_exact"]) if "r_m_exact" in d else Fraction(d["r_m"]).limit_denominator()
        return cls(int(d["r_o"]), r_m, Fraction(d["r_j"]).limit_denominator(),
                   Fraction(d["r_c"]).limit_denominator(), int(d["w_m"]))


def accepted_text(text: str) -> bool:
    """True when every character is printable ASCII or ASCII whitespace."""
    return all(" " <= ch <= "~" or ch in "\t\n\r\f\v" for ch in text)


def compute_reward(golden_verdict: Verdict, mutation_verdicts: Sequence[Verdict], judge_ok: bool,
                   plan_text: str) -> RewardVector:
    if not mutation_verdicts:
        raise ValueError("at least one mutation verdict is required")
    r_o = 1 if golden_verdict.passed else 0
    failed = sum(1 for v in mutation_verdicts if not v.passed)
    return RewardVector(
        r_o=r_o,
        r_m=Fraction(failed, len(mutation_verdicts)),
        r_j=R_JUDGE if judge_ok else Fraction(0),
        r_c=R_CHARSET if accepted_text(plan_text) else Fraction(0),
        w_m=r_o,
    )


# -- advantages ---------------------------------------------------------------------


@dataclass(frozen=True)
class AdvantageGroup:
    rewards: Tuple[float, ...]
    method: str = "whole_group"
    epsilon_sigma: float = EPS_SIGMA

    def __post_init__(self):
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        object.__setattr__(self, "method", METHOD_ALIASES.get(self.method, self.method))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if len(self.rewards) < 2:
            raise ValueError("advantage groups need at least two rewards")
        if not self.epsilon_sigma > 0:
            raise ValueError("epsilon_sigma must be positive")


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _std(xs: Sequence[float]) -> float:
    """Sample standard deviation (n - 1 denominator); exactly zero when all values agree."""
    if len(xs) < 2 or min(xs) == max(xs):
        return 0.0
    mu = _mean(xs)
    return math.sqrt(math.fsum((x - mu) ** 2 for x in xs) / (len(xs) - 1))


def compute_advantages(g: AdvantageGroup) -> List[float]:
    r = list(g.rewards)
    n = len(r)
    if min(r) == max(r):
        # exact zeros; a rounded mean divided by the epsilon floor would leave ~1e-8 residue
        return [0.0] * n
    if g.method == "whole_group":
        mu, sd = _mean(r), _std(r)
        return [(x - mu) / max(sd, g.epsilon_sigma) for x in r]
    out = []
    sd_all = _std(r)
    for i, x in enumerate(r):
        rest = r[:i] + r[i + 1:]
        mu = _mean(rest)
        if g.method == "leave_one_out":
            sd = _std(rest) if n > 2 else 0.0
            out.append((x - mu) / (sd if sd > 0 else 1.0))
        else:
            out.append((x - mu) / max(sd_all, g.epsilon_sigma))
    return out


def advantages(rewards: Iterable[float], method: str = "whole_group", epsilon_sigma: float = EPS_SIGMA) -> List[float]:
    return compute_advantages(AdvantageGroup(tuple(rewards), method, epsilon_sigma))


# -- diversified-state grouping -----------------------------------------------------


@dataclass(frozen=True)
class SmuMember:
    state_id: str
    mutation_id: str
    reward: float


@dataclass(frozen=True)
class SmuGroup:
    base_state_id: str
    members: Tuple[SmuMember, ...]
    undersized: bool = False

    @property
    def rewards(self) -> List[float]:
        return [m.reward for m in self.members]

    def advantages(self, method: str = "smu_fixed") -> List[float]:
        return advantages(self.rewards, method)

    def to_dict(self) -> dict:
        return asdict(self)


class DuplicateSampleError(ValueError):
    pass


def group_smu(samples: Iterable[Tuple[str, str, float]], min_size: int = 2) -> List[SmuGroup]:
    """Partition ``(base_state_id, mutation_id, reward)`` samples by base state.

    Each mutated state contributes one sampled action; a repeated
    ``(base, mutation)`` pair is rejected. Groups keep first-seen order.
    """
    groups: Dict[str, List[SmuMember]] = {}
    seen = set()
    for base, mutation, reward in samples:
        key = (base, mutation)
        if key in seen:
            raise DuplicateSampleError(f"mutation '{mutation}' sampled twice for base '{base}'")
        seen.add(key)
        groups.setdefault(base, []).append(SmuMember(f"{base}+{mutation}", mutation, float(reward)))
    return [SmuGroup(base, tuple(ms), undersized=len(ms) < min_size) for base, ms in groups.items()]


# -- clipped objective ----------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveConfig:
    epsilon: float = 0.2
    beta: float = 0.01
    aggregation: str = "sequence_mean"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.aggregation not in ("sequence_mean", "token_mean"):
            raise ValueError("aggregation must be sequence_mean or token_mean")


def clipped_term(ratio: float, advantage: float, epsilon: float) -> float:
    if not ratio > 0:
        raise ValueError("probability ratio must be positive")
    if advantage > 0:
        return min(ratio, 1 + epsilon) * advantage
    return max(ratio, 1 - epsilon) * advantage


def smu_objective(group: Sequence[Tuple[Sequence[float], float, Sequence[float]]],
                  cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    """Group objective from ``(per-token ratios, advantage, per-token KL)`` samples."""
    if not group:
        raise ValueError("objective needs at least one sample")
    per_sample: List[List[float]] = []
    for ratios, adv, kls in group:
        if not ratios or len(ratios) != len(kls):
            raise ValueError("each sample needs matching, nonempty ratio and KL sequences")
        per_sample.append([clipped_term(r, adv, cfg.epsilon) - cfg.beta * k for r, k in zip(ratios, kls)])
    if cfg.aggregation == "sequence_mean":
        return _mean([_mean(terms) for terms in per_sample])
    return _mean([t for terms in per_sample for t in terms])


__all__ = [
    "AdvantageGroup", "DuplicateSampleError", "EPS_SIGMA", "METHODS", "ObjectiveConfig",
    "RewardVector", "SmuGroup", "SmuMember", "accepted_text", "advantages", "clipped_term",
    "compute_advantages", "compute_reward", "group_smu", "smu_objective",
]
