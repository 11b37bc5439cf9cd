"""Testbench skeletons derived from a port list."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from ..hdl import PortDecl, infer_clock_reset
from .schema import SCHEMA_ID


@dataclass(frozen=True)
class TestbenchTemplate:
    __test__ = False

    ports: Tuple[Tuple[str, str, int], ...]
    clock: Optional[str]
    reset: Optional[str]
    reset_active: int
    skeleton: str

    @property
    def combinational(self) -> bool:
        return self.clock is None


def _fill(names) -> str:
    return ", ".join(f'"{n}": <{w}-bit value>' for n, w in names)


def make_template(ports: Sequence[PortDecl]) -> TestbenchTemplate:
    if not ports:
        raise ValueError("a template needs at least one port")
    cr = infer_clock_reset(ports)
    drivable = [(p.name, p.width) for p in ports if p.direction == "input" and p.name != cr.clock]
    observable = [(p.name, p.width) for p in ports if p.direction == "output"]
    lines = ["// interface: " + ", ".join(f"{p.direction} {p.name}[{p.width}]" for p in ports)]
    if cr.clock:
        lines.append(f"// clock '{cr.clock}' is driven by the harness: one rising and falling edge per tick")
    else:
        lines.append("// combinational design: no clock; each step settles once")
    if cr.reset:
        level = "low" if cr.reset_active == 0 else "high"
        lines.append(f"// reset '{cr.reset}' is active-{level}; assert it in the first step")
    clock = f'"{cr.clock}"' if cr.clock else "null"
    reset = f'{{"signal": "{cr.reset}", "active": {cr.reset_active}}}' if cr.reset else "null"
    lines += [
        "{",
        f'  "schema": "{SCHEMA_ID}",',
        f'  "clock": {clock},',
        f'  "reset": {reset},',
        '  "steps": [',
        "    // FILL: one object per step",
        f"    {{\"drives\": {{ /* FILL drives: {_fill(drivable)} */ }},",
        f"     \"expect\": {{ /* FILL expectations: {_fill(observable)} */ }},",
        '     "ticks": 1}',
        "  ]",
        "}",
    ]
    iface = tuple((p.name, p.direction, p.width) for p in ports)
    return TestbenchTemplate(iface, cr.clock, cr.reset, cr.reset_active, "\n".join(lines) + "\n")


__all__ = ["TestbenchTemplate", "make_template"]
