"""Event-driven two-state simulation with delta cycles and an NBA region.

A simulation instance carries ``lanes`` independent copies of the design state
(one numpy ``uint64`` slot per lane), so a batch of stimulus vectors runs in
one pass. A single-lane instance is the ordinary scalar simulator; every lane
follows exactly the semantics a one-lane run would.

Scheduling per settle:

1. run every pending combinational process (continuous assigns and
   level-sensitive always blocks) in declaration order; repeat while any
   remain pending,
2. once combinational logic is quiet, run every pending edge-triggered block
   in declaration order (blocking writes are visible to later blocks),
3. when both are quiet, apply queued nonblocking writes in order,

and loop until nothing is pending. Each loop iteration is one delta cycle.
Always blocks never retrigger themselves; continuous assigns do.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..hdl.ast import (
    Binary, BitSelect, BitVecValue, Block, Case, Concat, Expr, If, Literal,
    ModuleDecl, PartSelect, ProcAssign, Ref, Stmt, Ternary, Unary,
    lvalue_reads, mask, refs_in, stmt_reads,
)

U64 = np.uint64
DEFAULT_DELTA_LIMIT = 1000


class SimulationError(Exception):
    pass


class OscillationError(SimulationError):
    def __init__(self, limit: int):
        super().__init__(f"no convergence after {limit} delta cycles")
        self.limit = limit


def _m(width: int):
    return U64(mask(width))


# -- expression compilation ----------------------------------------------------------
#
# A compiled expression maps the value list ``v`` (one array per signal) to an
# array or numpy scalar holding the result evaluated at context width ``ctx``.


class _Compiler:
    def __init__(self, m: ModuleDecl):
        self.index: Dict[str, int] = {}
        self.widths: Dict[str, int] = {}
        self.lsbs: Dict[str, int] = {}
        for p in m.ports:
            self._add(p.name, p.width, p.lsb)
        for n in m.nets:
            self._add(n.name, n.width, n.lsb)
        self.params = m.param_values()

    def _add(self, name: str, width: int, lsb: int) -> None:
        self.index[name] = len(self.index)
        self.widths[name] = width
        self.lsbs[name] = lsb

    def expr(self, e: Expr, ctx: int) -> Callable:
        cm = _m(ctx)
        if isinstance(e, Literal):
            c = U64(e.value.bits & mask(ctx))
            return lambda v: c
        if isinstance(e, Ref):
            if e.name in self.params:
                c = U64(self.params[e.name].bits & mask(ctx))
                return lambda v: c
            i = self.index[e.name]
            return lambda v: v[i]
        if isinstance(e, BitSelect):
            i = self.index[e.name]
            lsb, width = self.lsbs[e.name], self.widths[e.name]
            if isinstance(e.index, Literal) or (isinstance(e.index, Ref) and e.index.name in self.params):
                idx = e.index.value.bits if isinstance(e.index, Literal) else self.params[e.index.name].bits
                sh = U64(idx - lsb)
                return lambda v: (v[i] >> sh) & U64(1)
            fi = self.expr(e.index, e.index.width)
            ulsb, uw = U64(lsb), U64(width)

            def bit_select(v):
                rel = fi(v) - ulsb  # wraps below lsb, landing out of range
                ok = rel < uw
                return np.where(ok, (v[i] >> np.minimum(rel, U64(63))) & U64(1), U64(0))
            return bit_select
        if isinstance(e, PartSelect):
            i = self.index[e.name]
            sh, pm = U64(e.lsb - self.lsbs[e.name]), _m(e.width)
            return lambda v: (v[i] >> sh) & pm
        if isinstance(e, Concat):
            parts = []
            offset = 0
            for p in reversed(e.parts):
                parts.append((self.expr(p, p.width), U64(offset)))
                offset += p.width

            def concat(v):
                out = U64(0)
                for f, off in parts:
                    out = out | (f(v) << off)
                return out
            return concat
        if isinstance(e, Unary):
            return self._unary(e, ctx, cm)
        if isinstance(e, Binary):
            return self._binary(e, ctx, cm)
        if isinstance(e, Ternary):
            fc = self.expr(e.cond, e.cond.width)
            ft, fo = self.expr(e.then, ctx), self.expr(e.other, ctx)
            return lambda v: np.where(fc(v) != 0, ft(v), fo(v))
        raise TypeError(type(e).__name__)

    def _unary(self, e: Unary, ctx: int, cm) -> Callable:
        op = e.op
        if op == "~":
            f = self.expr(e.operand, ctx)
            return lambda v: ~f(v) & cm
        if op == "-":
            f = self.expr(e.operand, ctx)
            return lambda v: (U64(0) - f(v)) & cm
        w = e.operand.width
        f = self.expr(e.operand, w)
        if op == "!":
            return lambda v: (f(v) == 0).astype(U64)
        if op == "|":
            return lambda v: (f(v) != 0).astype(U64)
        if op == "&":
            full = _m(w)
            return lambda v: (f(v) == full).astype(U64)
        return lambda v: (np.bitwise_count(f(v)) & 1).astype(U64)

    def _binary(self, e: Binary, ctx: int, cm) -> Callable:
        op = e.op
        if op in ("&&", "||"):
            fa, fb = self.expr(e.left, e.left.width), self.expr(e.right, e.right.width)
            if op == "&&":
                return lambda v: ((fa(v) != 0) & (fb(v) != 0)).astype(U64)
            return lambda v: ((fa(v) != 0) | (fb(v) != 0)).astype(U64)
        if op in ("<", "<=", ">", ">=", "==", "!="):
            w = max(e.left.width, e.right.width)
            fa, fb = self.expr(e.left, w), self.expr(e.right, w)
            cmp = {"<": np.less, "<=": np.less_equal, ">": np.greater,
                   ">=": np.greater_equal, "==": np.equal, "!=": np.not_equal}[op]
            return lambda v: cmp(fa(v), fb(v)).astype(U64)
        if op in ("<<", ">>"):
            fa, fb = self.expr(e.left, ctx), self.expr(e.right, e.right.width)
            limit = U64(ctx)
            if op == "<<":
                return lambda v: _shl(fa(v), fb(v), limit) & cm
            return lambda v: _shr(fa(v), fb(v), limit)
        fa, fb = self.expr(e.left, ctx), self.expr(e.right, ctx)
        if op == "+":
            return lambda v: (fa(v) + fb(v)) & cm
        if op == "-":
            return lambda v: (fa(v) - fb(v)) & cm
        if op == "*":
            return lambda v: (fa(v) * fb(v)) & cm
        if op == "&":
            return lambda v: fa(v) & fb(v)
        if op == "|":
            return lambda v: fa(v) | fb(v)
        if op == "^":
            return lambda v: fa(v) ^ fb(v)
        raise ValueError(op)

    # -- lvalues: compiled to ``f(v, value) -> [(signal, field_mask, bits)]``

    def lvalue(self, e: Expr) -> Callable:
        pieces = []
        offset = 0
        for part in reversed(_flatten(e)):
            pieces.append((self._lpiece(part), U64(offset), _m(part.width)))
            offset += part.width

        def resolve(v, value):
            return [piece(v, (value >> off) & pm) for piece, off, pm in pieces]
        return resolve

    def _lpiece(self, e: Expr) -> Callable:
        i = self.index[e.name]
        lsb, width = self.lsbs[e.name], self.widths[e.name]
        if isinstance(e, Ref):
            fm = _m(width)
            return lambda v, val: (i, fm, val)
        if isinstance(e, PartSelect):
            sh = U64(e.lsb - lsb)
            fm = _m(e.width) << sh
            return lambda v, val: (i, fm, (val << sh) & fm)
        fi = self.expr(e.index, e.index.width)
        ulsb, uw = U64(lsb), U64(width)

        def bit(v, val):
            rel = fi(v) - ulsb
            sh = np.minimum(rel, U64(63))
            fm = np.where(rel < uw, U64(1) << sh, U64(0))
            return i, fm, (val << sh) & fm
        return bit


def _flatten(e: Expr) -> List[Expr]:
    if isinstance(e, Concat):
        return [leaf for p in e.parts for leaf in _flatten(p)]
    return [e]


def _shl(a, s, limit):
    return np.where(s < limit, a << np.minimum(s, U64(63)), U64(0))


def _shr(a, s, limit):
    return np.where(s < limit, a >> np.minimum(s, U64(63)), U64(0))


# -- processes ----------------------------------------------------------------------


@dataclass
class Process:
    kind: str  # "assign" | "comb" | "edge"
    run: Callable
    triggers: Tuple[Tuple[str, str], ...]  # (signal, edge)

    @property
    def self_trigger(self) -> bool:
        return self.kind == "assign"


class CompiledDesign:
    def __init__(self, m: ModuleDecl):
        self.module = m
        c = _Compiler(m)
        self.index = c.index
        self.widths = [c.widths[n] for n in c.index]
        self.names = list(c.index)
        procs: List[Process] = []
        for a in m.assigns:
            procs.append(self._assign_proc(c, a))
        for blk in m.blocks:
            body = self._stmt(c, blk.body)
            if blk.sensitivity.kind == "star":
                reads = sorted(set(stmt_reads(blk.body)) - set(c.params))
                trig = tuple((s, "level") for s in reads)
            else:
                trig = tuple((e.signal, e.edge) for e in blk.sensitivity.entries)
            procs.append(Process("edge" if blk.sequential else "comb", body, trig))
        self.processes = procs
        self.comb = [i for i, p in enumerate(procs) if p.kind != "edge"]
        self.edge = [i for i, p in enumerate(procs) if p.kind == "edge"]
        sens: Dict[int, List[Tuple[int, str]]] = {i: [] for i in range(len(self.names))}
        for pi, p in enumerate(procs):
            for sig, edge in p.triggers:
                sens[self.index[sig]].append((pi, edge))
        self.sensitivity = sens

    def _assign_proc(self, c: _Compiler, a) -> Process:
        ctx = max(a.lhs.width, a.rhs.width)
        rhs = c.expr(a.rhs, ctx)
        lhs = c.lvalue(a.lhs)
        lm = _m(a.lhs.width)

        def run(st, lanes):
            for sig, fm, bits in lhs(st.v, rhs(st.v) & lm):
                st.write(sig, fm, bits, lanes)
        reads = set(refs_in(a.rhs)) | set(lvalue_reads(a.lhs))
        reads -= set(c.params)
        return Process("assign", run, tuple((s, "level") for s in sorted(reads)))

    def _stmt(self, c: _Compiler, s: Stmt) -> Callable:
        if isinstance(s, Block):
            subs = [self._stmt(c, x) for x in s.stmts]

            def block(st, lanes):
                for f in subs:
                    f(st, lanes)
            return block
        if isinstance(s, If):
            fc = c.expr(s.cond, s.cond.width)
            then = self._stmt(c, s.then)
            other = self._stmt(c, s.other) if s.other is not None else None

            def if_(st, lanes):
                cond = fc(st.v) != 0
                taken = lanes & cond
                if taken.any():
                    then(st, taken)
                if other is not None:
                    rest = lanes & ~cond
                    if rest.any():
                        other(st, rest)
            return if_
        if isinstance(s, Case):
            w = max([s.subject.width] + [lab.width for arm in s.arms for lab in arm.labels])
            fs = c.expr(s.subject, w)
            arms = [([c.expr(lab, w) for lab in arm.labels], self._stmt(c, arm.body)) for arm in s.arms]
            default = self._stmt(c, s.default) if s.default is not None else None

            def case(st, lanes):
                subj = fs(st.v)
                matched = np.zeros(st.lanes, dtype=bool)
                for labels, body in arms:
                    hit = np.zeros(st.lanes, dtype=bool)
                    for lab in labels:
                        hit |= subj == lab(st.v)
                    sel = lanes & hit & ~matched
                    matched |= hit
                    if sel.any():
                        body(st, sel)
                if default is not None:
                    rest = lanes & ~matched
                    if rest.any():
                        default(st, rest)
            return case
        if isinstance(s, ProcAssign):
            ctx = max(s.lhs.width, s.rhs.width)
            rhs = c.expr(s.rhs, ctx)
            lhs = c.lvalue(s.lhs)
            lm = _m(s.lhs.width)
            if s.blocking:
                def blocking(st, lanes):
                    for sig, fm, bits in lhs(st.v, rhs(st.v) & lm):
                        st.write(sig, fm, bits, lanes)
                return blocking

            def nonblocking(st, lanes):
                for sig, fm, bits in lhs(st.v, rhs(st.v) & lm):
                    st.nba.append((sig, fm, bits, lanes))
            return nonblocking
        raise TypeError(type(s).__name__)


@lru_cache(maxsize=256)
def compile_design(m: ModuleDecl) -> CompiledDesign:
    return CompiledDesign(m)


# -- runtime state ------------------------------------------------------------------------


class SimInstance:
    """Mutable simulation state for one design; single owner, not thread-safe."""

    def __init__(self, design: ModuleDecl, lanes: int = 1, delta_limit: int = DEFAULT_DELTA_LIMIT):
        self.design = design
        self.cd = compile_design(design)
        self.lanes = lanes
        self.delta_limit = delta_limit
        self.v = [np.zeros(lanes, dtype=U64) for _ in self.cd.names]
        self.all = np.ones(lanes, dtype=bool)
        self.pending = [np.zeros(lanes, dtype=bool) for _ in self.cd.processes]
        self.nba: List[tuple] = []
        self.running: Optional[int] = None
        self.time = 0
        self.deltas = 0
        for i in self.cd.comb:
            self.pending[i] = self.all.copy()

    # -- writes and event notification
    def write(self, sig: int, fm, bits, lanes) -> None:
        old = self.v[sig]
        new = np.where(lanes, (old & ~fm) | bits, old)
        changed = new != old
        if not changed.any():
            return
        self.v[sig] = new
        for pi, edge in self.cd.sensitivity[sig]:
            if pi == self.running and not self.cd.processes[pi].self_trigger:
                continue
            if edge == "level":
                trig = changed
            elif edge == "posedge":
                trig = changed & ((new & U64(1)) == 1) & ((old & U64(1)) == 0)
            else:
                trig = changed & ((new & U64(1)) == 0) & ((old & U64(1)) == 1)
            self.pending[pi] = self.pending[pi] | trig

    def _run_round(self, group) -> bool:
        ran = False
        for pi in group:
            lanes = self.pending[pi]
            if not lanes.any():
                continue
            ran = True
            self.pending[pi] = np.zeros(self.lanes, dtype=bool)
            self.running = pi
            self.cd.processes[pi].run(self, lanes)
        self.running = None
        return ran

    def settle(self) -> int:
        """Run delta cycles to a fixpoint; returns the number of delta cycles."""
        count = 0
        with np.errstate(all="ignore"):
            while True:
                if count >= self.delta_limit:
                    raise OscillationError(self.delta_limit)
                if self._run_round(self.cd.comb):
                    count += 1
                    continue
                if self._run_round(self.cd.edge):
                    count += 1
                    continue
                if self.nba:
                    queue, self.nba = self.nba, []
                    for sig, fm, bits, lanes in queue:
                        self.write(sig, fm, bits, lanes)
                    count += 1
                    continue
                break
        self.deltas += count
        return count

    # -- stimulus helpers
    def set(self, name: str, value) -> None:
        """Drive an input (all lanes, or per lane when ``value`` is an array)."""
        i = self.cd.index[name]
        w = self.cd.widths[i]
        bits = np.asarray(value, dtype=U64) & _m(w)
        with np.errstate(all="ignore"):
            self.write(i, _m(w), bits, self.all)

    def drive(self, values: Mapping[str, object]) -> None:
        for name, value in values.items():
            self.set(name, value)
        self.settle()

    def tick(self, clock: str) -> None:
        self.set(clock, 1)
        self.settle()
        self.set(clock, 0)
        self.settle()
        self.time += 1

    def get(self, name: str) -> np.ndarray:
        return self.v[self.cd.index[name]]

    def peek(self, name: str, lane: int = 0) -> BitVecValue:
        i = self.cd.index[name]
        return BitVecValue(self.cd.widths[i], int(self.v[i][lane]))

    @property
    def state(self) -> Dict[str, BitVecValue]:
        return {n: self.peek(n) for n in self.cd.names}

    @property
    def nba_queue(self) -> List[tuple]:
        return [(self.cd.names[sig], fm, bits) for sig, fm, bits, _ in self.nba]


def elaborate_sim(design: ModuleDecl, delta_limit: int = DEFAULT_DELTA_LIMIT, lanes: int = 1) -> SimInstance:
    inst = SimInstance(design, lanes=lanes, delta_limit=delta_limit)
    inst.settle()
    return inst


def settle(inst: SimInstance) -> int:
    return inst.settle()


def tick(inst: SimInstance, clock: str) -> None:
    p = inst.design.port(clock)
    if p is None or p.direction != "input" or p.width != 1:
        raise SimulationError(f"'{clock}' is not a 1-bit input")
    inst.tick(clock)
