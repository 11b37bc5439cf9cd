"""Random-stimulus functional validation of a candidate against its golden design.

Both designs see identical random input sequences. Every output is sampled
after the inputs settle and, for clocked designs, again after the rising and
after the falling clock edge. A (vector, cycle) pair counts as one mismatch
when any sample of any output differs.

Stimulus is generated in fixed blocks of ``BLOCK`` vectors, each block seeded
by ``(seed, block index)``. Vector ``i`` is therefore a pure function of the
seed and ``i``, and a longer run always extends a shorter one.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .hdl import ModuleDecl, PortDecl, infer_clock_reset
from .hdl.ast import mask
from .parallel import ordered_map
from .sim import OscillationError, SimInstance, Step, StimulusProgram
from .sim.engine import DEFAULT_DELTA_LIMIT

BLOCK = 1000
DISTRIBUTIONS = ("uniform", "biased-corner")
OSCILLATION = "<oscillation>"


@dataclass(frozen=True)
class RandomStimulusConfig:
    vectors: int = 10_000
    cycles_per_vector: int = 16
    reset_toggle_probability: float = 0.1
    input_distribution: str = "uniform"
    seed: int = 0
    mismatch_cap: Optional[int] = 8  # None counts every mismatch
    delta_limit: int = DEFAULT_DELTA_LIMIT

    def __post_init__(self):
        if self.vectors < 1:
            raise ValueError("vectors must be >= 1")
        if self.cycles_per_vector < 1:
            raise ValueError("cycles_per_vector must be >= 1")
        if not 0.0 <= self.reset_toggle_probability <= 1.0:
            raise ValueError("reset_toggle_probability must lie in [0, 1]")
        if self.input_distribution not in DISTRIBUTIONS:
            raise ValueError(f"input_distribution must be one of {DISTRIBUTIONS}")
        if self.mismatch_cap is not None and self.mismatch_cap < 1:
            raise ValueError("mismatch_cap must be >= 1 or None")

    def full_count(self) -> "RandomStimulusConfig":
        return _replace(self, mismatch_cap=None)

    def to_dict(self) -> dict:
        return asdict(self)


def _replace(cfg, **kw):
    d = asdict(cfg)
    d.update(kw)
    return type(cfg)(**d)


@dataclass(frozen=True)
class Mismatch:
    vector: int
    cycle: int
    output: str
    golden: Optional[int]
    candidate: Optional[int]


@dataclass(frozen=True)
class ValidationReport:
    vectors_run: int
    mismatches: int
    first_mismatch: Optional[Mismatch] = None
    classification: str = "clean"
    cycles_per_vector: int = 0
    capped: bool = False
    oscillation: Optional[str] = None  # "golden" | "candidate" when a design failed to settle

    def __post_init__(self):
        if (self.classification == "clean") != (self.mismatches == 0):
            raise ValueError("classification must be clean exactly when there are no mismatches")

    @property
    def clean(self) -> bool:
        return self.classification == "clean"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        d = dict(d)
        fm = d.get("first_mismatch")
        d["first_mismatch"] = Mismatch(**fm) if fm else None
        return cls(**d)


class InterfaceError(ValueError):
    pass


# -- stimulus generation ------------------------------------------------------------


def _iface_key(iface: Sequence[PortDecl]) -> Tuple[Tuple[str, str, int], ...]:
    return tuple((p.name, p.direction, p.width) for p in iface)


def _draw(rng: np.random.Generator, width: int, shape, dist: str) -> np.ndarray:
    full = np.uint64(mask(width))
    raw = rng.integers(0, np.iinfo(np.uint64).max, size=shape, dtype=np.uint64, endpoint=True)
    uniform = raw & full
    if dist == "uniform":
        return uniform
    # biased-corner: a quarter each of all-zeros, all-ones, one-hot, and uniform
    pick = rng.integers(0, 4, size=shape)
    onehot = np.left_shift(np.uint64(1), rng.integers(0, width, size=shape).astype(np.uint64))
    out = np.where(pick == 0, np.uint64(0), uniform)
    out = np.where(pick == 1, full, out)
    return np.where(pick == 2, onehot, out)


@lru_cache(maxsize=256)
def _stimulus_block(iface: Tuple[Tuple[str, str, int], ...], seed: int, cycles: int,
                    p_toggle: float, dist: str, block: int) -> Dict[str, np.ndarray]:
    """Drive matrices of shape (cycles, BLOCK) for every non-clock input."""
    ports = [PortDecl(n, d, w - 1, 0) for n, d, w in iface]
    cr = infer_clock_reset(ports)
    rng = np.random.default_rng([seed, block])
    out: Dict[str, np.ndarray] = {}
    for name, direction, width in iface:
        if direction != "input" or name == cr.clock:
            continue
        if name == cr.reset:
            asserted = np.zeros((cycles, BLOCK), dtype=bool)
            asserted[0] = True
            flips = rng.random((cycles, BLOCK)) < p_toggle
            for c in range(2, cycles):
                asserted[c] = asserted[c - 1] ^ flips[c]
            level = asserted if cr.reset_active else ~asserted
            out[name] = level.astype(np.uint64)
        else:
            out[name] = _draw(rng, width, (cycles, BLOCK), dist)
    for arr in out.values():
        arr.setflags(write=False)
    return out


def _block_for(iface, cfg: RandomStimulusConfig, block: int) -> Dict[str, np.ndarray]:
    return _stimulus_block(_iface_key(iface), cfg.seed, cfg.cycles_per_vector,
                           float(cfg.reset_toggle_probability), cfg.input_distribution, block)


def gen_random_program(iface: Sequence[PortDecl], cfg: RandomStimulusConfig, index: int) -> StimulusProgram:
    """The ``index``-th random program: every input driven each cycle, no expectations."""
    if not iface:
        raise ValueError("interface is empty")
    cr = infer_clock_reset(iface)
    block = _block_for(iface, cfg, index // BLOCK)
    lane = index % BLOCK
    names = [p.name for p in iface if p.name in block]
    steps = tuple(
        Step(drives={n: int(block[n][c, lane]) for n in names})
        for c in range(cfg.cycles_per_vector)
    )
    reset = (cr.reset, cr.reset_active) if cr.reset else None
    return StimulusProgram(clock=cr.clock, reset=reset, steps=steps)


# -- batched simulation --------------------------------------------------------------


def _trace(design: ModuleDecl, drives: Dict[str, np.ndarray], outputs: List[str], lanes: int,
           cycles: int, delta_limit: int) -> Tuple[np.ndarray, Optional[int]]:
    """Output samples of shape (cycles, points, outputs, lanes).

    On oscillation the trace is cut short and the failing cycle is returned.
    """
    cr = infer_clock_reset(design.ports)
    points = 3 if cr.clock else 1
    trace = np.zeros((cycles, points, len(outputs), lanes), dtype=np.uint64)
    try:
        sim = SimInstance(design, lanes=lanes, delta_limit=delta_limit)
        sim.settle()
    except OscillationError:
        return trace[:0], 0
    for c in range(cycles):
        try:
            for name, arr in drives.items():
                sim.set(name, arr[c, :lanes])
            sim.settle()
            samples = [_sample(sim, outputs)]
            if cr.clock:
                sim.set(cr.clock, 1)
                sim.settle()
                samples.append(_sample(sim, outputs))
                sim.set(cr.clock, 0)
                sim.settle()
                samples.append(_sample(sim, outputs))
        except OscillationError:
            return trace[:c], c
        trace[c] = np.stack(samples)
    return trace, None


def _sample(sim: SimInstance, outputs: List[str]) -> np.ndarray:
    return np.stack([sim.get(n).copy() for n in outputs]) if outputs else np.zeros((0, sim.lanes), np.uint64)


@lru_cache(maxsize=64)
def _golden_trace(golden: ModuleDecl, cfg: RandomStimulusConfig, block: int, lanes: int):
    drives = _block_for(golden.ports, cfg, block)
    outputs = [p.name for p in golden.outputs]
    return _trace(golden, drives, outputs, lanes, cfg.cycles_per_vector, cfg.delta_limit)


@dataclass(frozen=True)
class _BlockResult:
    lanes: int
    mismatches: int
    first: Optional[Mismatch]
    oscillation: Optional[str]


def _compare_block(args) -> _BlockResult:
    golden, candidate, cfg, block, lanes = args
    base = block * BLOCK
    g_trace, g_osc = _golden_trace(golden, cfg, block, lanes)
    drives = _block_for(golden.ports, cfg, block)
    outputs = [p.name for p in golden.outputs]
    c_trace, c_osc = _trace(candidate, drives, outputs, lanes, cfg.cycles_per_vector, cfg.delta_limit)
    upto = min(len(g_trace), len(c_trace))
    if upto:
        diff = g_trace[:upto] != c_trace[:upto]  # (cycles, points, outputs, lanes)
        per_cycle = diff.any(axis=(1, 2))  # (cycles, lanes)
        count = int(per_cycle.sum())
    else:
        count = 0
    first = None
    if count:
        lane = int(np.flatnonzero(per_cycle.any(axis=0))[0])
        cyc = int(np.flatnonzero(per_cycle[:, lane])[0])
        pt, out = (int(x[0]) for x in np.nonzero(diff[cyc, :, :, lane]))
        first = Mismatch(base + lane, cyc, outputs[out],
                         int(g_trace[cyc, pt, out, lane]), int(c_trace[cyc, pt, out, lane]))
    osc = "golden" if g_osc is not None else ("candidate" if c_osc is not None else None)
    if osc:
        count += 1
        if first is None:
            first = Mismatch(base, upto, OSCILLATION, None, None)
    return _BlockResult(lanes, count, first, osc)


def _check_interfaces(golden: ModuleDecl, candidate: ModuleDecl) -> None:
    if set(golden.interface) != set(candidate.interface):
        raise InterfaceError(
            f"interfaces differ: {sorted(golden.interface)} vs {sorted(candidate.interface)}")


def compare(golden: ModuleDecl, candidate: ModuleDecl, cfg: RandomStimulusConfig = RandomStimulusConfig(),
            workers: int = 1) -> ValidationReport:
    """Simulate both designs under identical random programs and count mismatching cycles.

    Blocks are merged in order; with a mismatch cap, the run stops at the first
    block boundary at or past the cap, so the report never depends on ``workers``.
    """
    _check_interfaces(golden, candidate)
    blocks = [(b, min(BLOCK, cfg.vectors - b * BLOCK)) for b in range((cfg.vectors + BLOCK - 1) // BLOCK)]
    total = run = 0
    first: Optional[Mismatch] = None
    osc: Optional[str] = None
    step = max(1, workers)
    i = 0
    stop = False
    while i < len(blocks) and not stop:
        wave = blocks[i:i + step]
        i += len(wave)
        results = ordered_map(_compare_block, [(golden, candidate, cfg, b, n) for b, n in wave], workers)
        for r in results:
            run += r.lanes
            total += r.mismatches
            if first is None:
                first = r.first
            if r.oscillation and osc is None:
                osc = r.oscillation
            if osc or (cfg.mismatch_cap is not None and total >= cfg.mismatch_cap):
                stop = True
                break
    capped = stop and run < cfg.vectors
    return ValidationReport(
        vectors_run=run, mismatches=total, first_mismatch=first,
        classification="mutated" if total else "clean",
        cycles_per_vector=cfg.cycles_per_vector, capped=capped, oscillation=osc,
    )


def config_fingerprint(cfg: RandomStimulusConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


class Validator:
    """Callable wrapper binding a stimulus config and worker count."""

    def __init__(self, cfg: RandomStimulusConfig = RandomStimulusConfig(), workers: int = 1):
        self.cfg = cfg
        self.workers = workers

    def __call__(self, golden: ModuleDecl, candidate: ModuleDecl) -> ValidationReport:
        return compare(golden, candidate, self.cfg, self.workers)


__all__ = [
    "BLOCK", "InterfaceError", "Mismatch", "RandomStimulusConfig", "ValidationReport",
    "Validator", "compare", "config_fingerprint", "gen_random_program",
]
