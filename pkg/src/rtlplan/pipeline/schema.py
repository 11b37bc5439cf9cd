"""The ``stimulus/v1`` JSON encoding of stimulus programs.

A document looks like::

    {"schema": "stimulus/v1",
     "clock": "clk",
     "reset": {"signal": "rst_n", "active": 0},
     "steps": [{"drives": {"rst_n": 0, "en": 0}},
               {"drives": {"rst_n": 1, "en": 1}, "ticks": 2, "expect": {"count": "4'd2"}}]}

``clock`` and ``reset`` may be null. Values are non-negative integers or
strings holding a Verilog literal (``8'hff``), a ``0x``/``0b`` prefixed
number, or a decimal.
"""

from __future__ import annotations

import json
import re
from typing import Any, Dict, Optional

from ..hdl import HdlError, parse_literal
from ..sim import Step, StimulusProgram

SCHEMA_ID = "stimulus/v1"
_FENCE = re.compile(r"```(?:json)?[ \t]*\n(.*?)```", re.DOTALL)
_STEP_KEYS = {"drives", "expect", "ticks", "note"}


class ProgramParseError(ValueError):
    pass


def parse_value(v: Any, where: str) -> int:
    if isinstance(v, bool):
        raise ProgramParseError(f"{where}: booleans are not values; use 0 or 1")
    if isinstance(v, int):
        if v < 0:
            raise ProgramParseError(f"{where}: negative value {v}")
        return v
    if isinstance(v, str):
        s = v.strip().replace("_", "")
        try:
            if "'" in s:
                return int(parse_literal(s).value)
            return int(s, 0) if s[:2].lower() in ("0x", "0b", "0o") else int(s, 10)
        except (HdlError, ValueError):
            raise ProgramParseError(f"{where}: unreadable value {v!r}") from None
    raise ProgramParseError(f"{where}: expected an integer or literal string, got {type(v).__name__}")


def _extract(text: str) -> Any:
    m = _FENCE.search(text)
    body = m.group(1) if m else text
    start = body.find("{")
    if start < 0:
        raise ProgramParseError("no JSON object found")
    try:
        obj, _ = json.JSONDecoder().raw_decode(body, start)
    except json.JSONDecodeError as exc:
        raise ProgramParseError(f"malformed JSON: {exc.msg} at offset {exc.pos}") from None
    return obj


def _signal_map(d: Any, where: str) -> Dict[str, int]:
    if not isinstance(d, dict):
        raise ProgramParseError(f"{where} must be an object")
    out = {}
    for name, v in d.items():
        if not isinstance(name, str) or not name:
            raise ProgramParseError(f"{where}: bad signal name {name!r}")
        out[name] = parse_value(v, f"{where}.{name}")
    return out


def program_from_dict(doc: Any) -> StimulusProgram:
    if not isinstance(doc, dict):
        raise ProgramParseError("program must be a JSON object")
    if doc.get("schema") != SCHEMA_ID:
        raise ProgramParseError(f"schema must be '{SCHEMA_ID}', got {doc.get('schema')!r}")
    clock = doc.get("clock")
    if clock is not None and not isinstance(clock, str):
        raise ProgramParseError("clock must be a signal name or null")
    reset = doc.get("reset")
    reset_t: Optional[tuple] = None
    if reset is not None:
        if not isinstance(reset, dict) or not isinstance(reset.get("signal"), str):
            raise ProgramParseError("reset must be {signal, active} or null")
        active = reset.get("active", 1)
        if active not in (0, 1) or isinstance(active, bool):
            raise ProgramParseError("reset.active must be 0 or 1")
        reset_t = (reset["signal"], int(active))
    steps = doc.get("steps")
    if not isinstance(steps, list) or not steps:
        raise ProgramParseError("steps must be a nonempty list")
    out = []
    for k, s in enumerate(steps):
        where = f"steps[{k}]"
        if not isinstance(s, dict):
            raise ProgramParseError(f"{where} must be an object")
        extra = set(s) - _STEP_KEYS
        if extra:
            raise ProgramParseError(f"{where}: unknown keys {sorted(extra)}")
        ticks = s.get("ticks", 1)
        if isinstance(ticks, bool) or not isinstance(ticks, int) or ticks < 1:
            raise ProgramParseError(f"{where}.ticks must be a positive integer")
        expect = s.get("expect")
        out.append(Step(_signal_map(s.get("drives", {}), f"{where}.drives"),
                        _signal_map(expect, f"{where}.expect") if expect is not None else None, ticks))
    return StimulusProgram(clock, reset_t, tuple(out))


def parse_program(text: str) -> StimulusProgram:
    """Read a program from model output; a fenced code block is preferred when present."""
    return program_from_dict(_extract(text))


def program_to_dict(p: StimulusProgram) -> dict:
    steps = []
    for s in p.steps:
        d: Dict[str, Any] = {"drives": dict(s.drives)}
        if s.expect is not None:
            d["expect"] = dict(s.expect)
        if s.ticks != 1:
            d["ticks"] = s.ticks
        steps.append(d)
    return {
        "schema": SCHEMA_ID,
        "clock": p.clock,
        "reset": {"signal": p.reset[0], "active": p.reset[1]} if p.reset else None,
        "steps": steps,
    }


def serialize_program(p: StimulusProgram, indent: Optional[int] = None) -> str:
    return json.dumps(program_to_dict(p), indent=indent, sort_keys=True)


__all__ = [
    "ProgramParseError", "SCHEMA_ID", "parse_program", "parse_value", "program_from_dict",
    "program_to_dict", "serialize_program",
]
