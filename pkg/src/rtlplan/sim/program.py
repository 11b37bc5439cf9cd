from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

from ..hdl.ast import BitVecValue, ModuleDecl
from .engine import DEFAULT_DELTA_LIMIT, SimulationError, elaborate_sim


class InterfaceMismatch(SimulationError):
    pass


@dataclass(frozen=True)
class Step:
    drives: Dict[str, int] = field(default_factory=dict)
    expect: Optional[Dict[str, int]] = None
    ticks: int = 1

    def __post_init__(self):
        if self.ticks < 1:
            raise ValueError("ticks must be >= 1")


@dataclass(frozen=True)
class StimulusProgram:
    clock: Optional[str] = None
    reset: Optional[Tuple[str, int]] = None  # (signal, active level)
    steps: Tuple[Step, ...] = ()


@dataclass(frozen=True)
class Verdict:
    passed: bool
    failing_step: Optional[int] = None
    signal: Optional[str] = None
    observed: Optional[int] = None
    expected: Optional[int] = None
    cycles_run: int = 0
    error: Optional[str] = None

    def __post_init__(self):
        if self.passed != (self.failing_step is None):
            raise ValueError("passed must hold exactly when failing_step is absent")

    @classmethod
    def errored(cls, message: str) -> "Verdict":
        """A failed verdict for a program that could not be run at all."""
        return cls(False, failing_step=-1, error=message)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        return cls(**d)


def check_interface(design: ModuleDecl, program: StimulusProgram) -> None:
    ports = {p.name: p for p in design.ports}

    def need(name: str, direction: str, what: str) -> None:
        p = ports.get(name)
        if p is None or p.direction != direction:
            raise InterfaceMismatch(f"{what} '{name}' is not an {direction} of {design.name}")

    if program.clock is not None:
        need(program.clock, "input", "clock")
        if ports[program.clock].width != 1:
            raise InterfaceMismatch(f"clock '{program.clock}' must be 1 bit wide")
    if program.reset is not None:
        need(program.reset[0], "input", "reset")
    for step in program.steps:
        for name in step.drives:
            need(name, "input", "driven signal")
            if name == program.clock:
                raise InterfaceMismatch(f"clock '{name}' is owned by the program and cannot be driven")
        for name in step.expect or {}:
            need(name, "output", "expected signal")


def run_stimulus(design: ModuleDecl, program: StimulusProgram, trace: Optional[List[dict]] = None,
                 delta_limit: int = DEFAULT_DELTA_LIMIT) -> Verdict:
    """Execute ``program``; the first expectation mismatch halts with a failing verdict.

    When ``trace`` is a list, one record per step is appended to it.
    """
    check_interface(design, program)
    sim = elaborate_sim(design, delta_limit=delta_limit)
    widths = design.signal_widths()
    outputs = [p.name for p in design.outputs]
    cycles = 0
    for k, step in enumerate(program.steps):
        sim.drive({n: BitVecValue.of(widths[n], int(v)).bits for n, v in step.drives.items()})
        if program.clock is not None:
            for _ in range(step.ticks):
                sim.tick(program.clock)
                cycles += 1
        else:
            cycles += 1
        if trace is not None:
            trace.append({"step": k, "cycle": cycles,
                          "outputs": {n: int(sim.peek(n)) for n in outputs}})
        for name, want in (step.expect or {}).items():
            want = int(want)
            got = int(sim.peek(name))
            if got != want:
                return Verdict(False, k, name, got, want, cycles)
    return Verdict(True, cycles_run=cycles)
