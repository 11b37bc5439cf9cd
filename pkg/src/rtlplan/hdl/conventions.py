"""Clock/reset recognition by port-naming convention."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional

from .ast import PortDecl

_CLOCK_RE = re.compile(r"^(i_)?(clk|clock)(_i|_in)?$", re.IGNORECASE)
_RESET_RE = re.compile(r"^(i_)?a?(rst|reset)(_?n|_b)?(_i|_ni|_in)?$", re.IGNORECASE)
_ACTIVE_LOW_RE = re.compile(r"(rst|reset)(_?n|_b)(_i|_in)?$|_ni$", re.IGNORECASE)


@dataclass(frozen=True)
class ClockReset:
    clock: Optional[str]
    reset: Optional[str]
    reset_active: int = 1  # level at which the reset is asserted

    @property
    def reset_inactive(self) -> int:
        return 1 - self.reset_active


def infer_clock_reset(ports: Iterable[PortDecl]) -> ClockReset:
    clock = reset = None
    active = 1
    for p in ports:
        if p.direction != "input" or p.width != 1:
            continue
        if clock is None and _CLOCK_RE.match(p.name):
            clock = p.name
        elif reset is None and _RESET_RE.match(p.name):
            reset = p.name
            active = 0 if _ACTIVE_LOW_RE.search(p.name) else 1
    return ClockReset(clock, reset, active)


def is_reset_name(name: str) -> bool:
    return bool(_RESET_RE.match(name))
