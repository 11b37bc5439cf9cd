"""Independent reference evaluator used as a test oracle.

Everything here is scalar Python integers and plain recursion. Widths are
recomputed from declarations instead of read from elaborated annotations,
so a width bug in elaboration or in the vectorized engine shows up as a
disagreement.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Tuple

from rtlplan.hdl.ast import (
    Binary, BitSelect, Block, Case, Concat, If, Literal, ModuleDecl, PartSelect, ProcAssign, Ref,
    Ternary, Unary,
)


def _mask(w: int) -> int:
    return (1 << w) - 1


class Ctx:
    def __init__(self, m: ModuleDecl):
        self.m = m
        self.params = {p.name: (p.value.width, p.value.bits) for p in m.params}
        self.decl: Dict[str, Tuple[int, int]] = {}
        for p in m.ports:
            self.decl[p.name] = (p.msb, p.lsb)
        for n in m.nets:
            self.decl[n.name] = (n.msb, n.lsb)

    def width_of(self, name: str) -> int:
        msb, lsb = self.decl[name]
        return msb - lsb + 1

    # self-determined width
    def sw(self, e) -> int:
        if isinstance(e, Literal):
            return e.value.width
        if isinstance(e, Ref):
            return self.params[e.name][0] if e.name in self.params else self.width_of(e.name)
        if isinstance(e, BitSelect):
            return 1
        if isinstance(e, PartSelect):
            return e.msb - e.lsb + 1
        if isinstance(e, Concat):
            return sum(self.sw(p) for p in e.parts)
        if isinstance(e, Unary):
            return self.sw(e.operand) if e.op in ("~", "-") else 1
        if isinstance(e, Binary):
            if e.op in ("==", "!=", "<", "<=", ">", ">=", "&&", "||"):
                return 1
            if e.op in ("<<", ">>"):
                return self.sw(e.left)
            return max(self.sw(e.left), self.sw(e.right))
        if isinstance(e, Ternary):
            return max(self.sw(e.then), self.sw(e.other))
        raise TypeError(e)

    def ev(self, e, ctx: int, read) -> int:
        """Value of ``e`` evaluated at width ``ctx``; ``read(name)`` returns signal values."""
        mk = _mask(ctx)
        if isinstance(e, Literal):
            return e.value.bits & mk
        if isinstance(e, Ref):
            if e.name in self.params:
                return self.params[e.name][1] & mk
            return read(e.name) & mk
        if isinstance(e, BitSelect):
            idx = self.ev(e.index, self.sw(e.index), read)
            msb, lsb = self.decl[e.name]
            if lsb <= idx <= msb:
                return (read(e.name) >> (idx - lsb)) & 1
            return 0
        if isinstance(e, PartSelect):
            lsb = self.decl[e.name][1]
            return (read(e.name) >> (e.lsb - lsb)) & _mask(e.msb - e.lsb + 1) & mk
        if isinstance(e, Concat):
            v = 0
            for p in e.parts:
                w = self.sw(p)
                v = (v << w) | self.ev(p, w, read)
            return v & mk
        if isinstance(e, Unary):
            if e.op == "~":
                return ~self.ev(e.operand, ctx, read) & mk
            if e.op == "-":
                return -self.ev(e.operand, ctx, read) & mk
            w = self.sw(e.operand)
            x = self.ev(e.operand, w, read)
            return {"!": int(x == 0), "|": int(x != 0), "&": int(x == _mask(w)),
                    "^": bin(x).count("1") % 2}[e.op]
        if isinstance(e, Binary):
            op = e.op
            if op in ("&&", "||"):
                a = self.ev(e.left, self.sw(e.left), read) != 0
                b = self.ev(e.right, self.sw(e.right), read) != 0
                return int(a and b) if op == "&&" else int(a or b)
            if op in ("==", "!=", "<", "<=", ">", ">="):
                w = max(self.sw(e.left), self.sw(e.right))
                a, b = self.ev(e.left, w, read), self.ev(e.right, w, read)
                return int({"==": a == b, "!=": a != b, "<": a < b, "<=": a <= b,
                            ">": a > b, ">=": a >= b}[op])
            if op in ("<<", ">>"):
                a = self.ev(e.left, ctx, read)
                s = self.ev(e.right, self.sw(e.right), read)
                if s >= ctx:
                    return 0
                return (a << s) & mk if op == "<<" else a >> s
            a, b = self.ev(e.left, ctx, read), self.ev(e.right, ctx, read)
            return {"+": a + b, "-": a - b, "*": a * b, "&": a & b, "|": a | b, "^": a ^ b}[op] & mk
        if isinstance(e, Ternary):
            c = self.ev(e.cond, self.sw(e.cond), read)
            return self.ev(e.then if c else e.other, ctx, read)
        raise TypeError(e)

    # lvalue writes: list of (name, bit mask in signal coordinates, bits)
    def targets(self, lhs, value: int, read) -> List[Tuple[str, int, int]]:
        if isinstance(lhs, Concat):
            out = []
            shift = 0
            for p in reversed(lhs.parts):
                w = self.sw(p)
                out += self.targets(p, (value >> shift) & _mask(w), read)
                shift += w
            return out
        msb, lsb = self.decl[lhs.name]
        if isinstance(lhs, Ref):
            return [(lhs.name, _mask(msb - lsb + 1), value & _mask(msb - lsb + 1))]
        if isinstance(lhs, PartSelect):
            sh = lhs.lsb - lsb
            fm = _mask(lhs.msb - lhs.lsb + 1) << sh
            return [(lhs.name, fm, (value << sh) & fm)]
        idx = self.ev(lhs.index, self.sw(lhs.index), read)
        if not lsb <= idx <= msb:
            return []
        sh = idx - lsb
        return [(lhs.name, 1 << sh, (value & 1) << sh)]


def _reads(e, out: set) -> None:
    if isinstance(e, Ref):
        out.add(e.name)
    elif isinstance(e, BitSelect):
        out.add(e.name)
        _reads(e.index, out)
    elif isinstance(e, PartSelect):
        out.add(e.name)
    elif isinstance(e, Concat):
        for p in e.parts:
            _reads(p, out)
    elif isinstance(e, Unary):
        _reads(e.operand, out)
    elif isinstance(e, Binary):
        _reads(e.left, out)
        _reads(e.right, out)
    elif isinstance(e, Ternary):
        _reads(e.cond, out)
        _reads(e.then, out)
        _reads(e.other, out)


def _lhs_reads(e, out: set) -> None:
    if isinstance(e, Concat):
        for p in e.parts:
            _lhs_reads(p, out)
    elif isinstance(e, BitSelect):
        _reads(e.index, out)


def _stmt_reads(s, out: set) -> None:
    if s is None:
        return
    if isinstance(s, Block):
        for x in s.stmts:
            _stmt_reads(x, out)
    elif isinstance(s, If):
        _reads(s.cond, out)
        _stmt_reads(s.then, out)
        _stmt_reads(s.other, out)
    elif isinstance(s, Case):
        _reads(s.subject, out)
        for arm in s.arms:
            for lab in arm.labels:
                _reads(lab, out)
            _stmt_reads(arm.body, out)
        _stmt_reads(s.default, out)
    elif isinstance(s, ProcAssign):
        _reads(s.rhs, out)
        _lhs_reads(s.lhs, out)


class Oscillation(Exception):
    pass


class RefSim:
    """Scalar simulator following the documented scheduling rules.

    Per delta: pending level processes run in declaration order; when none
    are pending, pending edge blocks run; when neither, queued nonblocking
    writes apply. Always blocks ignore their own writes; assigns do not.
    """

    def __init__(self, m: ModuleDecl, limit: int = 1000):
        self.c = Ctx(m)
        self.m = m
        self.limit = limit
        self.val = {name: 0 for name in self.c.decl}
        self.procs = []  # (kind, body, triggers)
        for a in m.assigns:
            r: set = set()
            _reads(a.rhs, r)
            _lhs_reads(a.lhs, r)
            r -= set(self.c.params)
            self.procs.append(("assign", a, {(n, "level") for n in r}))
        for b in m.blocks:
            if b.sensitivity.kind == "star":
                r = set()
                _stmt_reads(b.body, r)
                trig = {(n, "level") for n in r - set(self.c.params)}
            else:
                trig = {(e.signal, e.edge) for e in b.sensitivity.entries}
            kind = "edge" if any(e.edge != "level" for e in b.sensitivity.entries) else "comb"
            self.procs.append((kind, b.body, trig))
        self.pending = [k != "edge" for k, _, _ in self.procs]
        self.nba: List[Tuple[str, int, int]] = []
        self.running: Optional[int] = None
        self.settle()

    def read(self, name: str) -> int:
        return self.val[name]

    def write(self, name: str, fm: int, bits: int) -> None:
        old = self.val[name]
        new = (old & ~fm) | bits
        if new == old:
            return
        self.val[name] = new
        for pi, (kind, _, trig) in enumerate(self.procs):
            if pi == self.running and kind != "assign":
                continue
            for sig, edge in trig:
                if sig != name:
                    continue
                if (edge == "level" or (edge == "posedge" and old & 1 == 0 and new & 1 == 1)
                        or (edge == "negedge" and old & 1 == 1 and new & 1 == 0)):
                    self.pending[pi] = True

    def _assign(self, lhs, rhs, blocking: bool) -> None:
        ctx = max(self.c.sw(lhs), self.c.sw(rhs))
        value = self.c.ev(rhs, ctx, self.read) & _mask(self.c.sw(lhs))
        for name, fm, bits in self.c.targets(lhs, value, self.read):
            if blocking:
                self.write(name, fm, bits)
            else:
                self.nba.append((name, fm, bits))

    def exec(self, s) -> None:
        if s is None:
            return
        if isinstance(s, Block):
            for x in s.stmts:
                self.exec(x)
        elif isinstance(s, If):
            if self.c.ev(s.cond, self.c.sw(s.cond), self.read):
                self.exec(s.then)
            else:
                self.exec(s.other)
        elif isinstance(s, Case):
            w = max([self.c.sw(s.subject)] + [self.c.sw(lab) for arm in s.arms for lab in arm.labels])
            subj = self.c.ev(s.subject, w, self.read)
            for arm in s.arms:
                if any(self.c.ev(lab, w, self.read) == subj for lab in arm.labels):
                    self.exec(arm.body)
                    return
            self.exec(s.default)
        elif isinstance(s, ProcAssign):
            self._assign(s.lhs, s.rhs, s.blocking)

    def _round(self, kinds) -> bool:
        ran = False
        for pi, (kind, body, _) in enumerate(self.procs):
            if kind not in kinds or not self.pending[pi]:
                continue
            ran = True
            self.pending[pi] = False
            self.running = pi
            if kind == "assign":
                self._assign(body.lhs, body.rhs, True)
            else:
                self.exec(body)
        self.running = None
        return ran

    def settle(self) -> None:
        n = 0
        while True:
            if n >= self.limit:
                raise Oscillation()
            if self._round(("assign", "comb")) or self._round(("edge",)):
                n += 1
                continue
            if self.nba:
                q, self.nba = self.nba, []
                for name, fm, bits in q:
                    self.write(name, fm, bits)
                n += 1
                continue
            return

    def drive(self, values: Dict[str, int]) -> None:
        for name, v in values.items():
            w = self.c.width_of(name)
            self.write(name, _mask(w), v & _mask(w))
        self.settle()

    def tick(self, clock: str) -> None:
        self.write(clock, 1, 1)
        self.settle()
        self.write(clock, 1, 0)
        self.settle()


def run_program(m: ModuleDecl, program) -> Tuple[bool, Optional[int]]:
    """(passed, failing step) for a StimulusProgram; oscillation counts as a failure at step -1."""
    try:
        sim = RefSim(m)
        for k, step in enumerate(program.steps):
            sim.drive(dict(step.drives))
            if program.clock is not None:
                for _ in range(step.ticks):
                    sim.tick(program.clock)
            for name, want in (step.expect or {}).items():
                if sim.read(name) != want:
                    return False, k
    except Oscillation:
        return False, -1
    return True, None


# -- brute-force combinational evaluation by recursive driver resolution --------------


def comb_outputs(m: ModuleDecl, inputs: Dict[str, int]) -> Dict[str, int]:
    """Outputs of an acyclic combinational design, each net computed from its driver on demand."""
    c = Ctx(m)
    drivers: Dict[str, object] = {}
    for a in m.assigns:
        drivers[a.lhs.name] = a
    for b in m.blocks:
        out: set = set()
        _block_targets(b.body, out)
        for n in out:
            drivers[n] = b
    cache: Dict[str, int] = dict(inputs)
    block_cache: Dict[int, Dict[str, int]] = {}

    def value(name: str) -> int:
        if name in cache:
            return cache[name]
        d = drivers.get(name)
        if d is None:
            v = 0
        elif hasattr(d, "rhs"):
            w = c.width_of(name)
            v = c.ev(d.rhs, max(w, c.sw(d.rhs)), value) & _mask(w)
        else:
            v = run_block(d)[name]
        cache[name] = v
        return v

    def run_block(b) -> Dict[str, int]:
        key = id(b)
        if key in block_cache:
            return block_cache[key]
        local: Dict[str, int] = {}
        out: set = set()
        _block_targets(b.body, out)

        def rd(name: str) -> int:
            return local[name] if name in local else (0 if name in out else value(name))

        def ex(s) -> None:
            if s is None:
                return
            if isinstance(s, Block):
                for x in s.stmts:
                    ex(x)
            elif isinstance(s, If):
                ex(s.then if c.ev(s.cond, c.sw(s.cond), rd) else s.other)
            elif isinstance(s, Case):
                w = max([c.sw(s.subject)] + [c.sw(lab) for arm in s.arms for lab in arm.labels])
                subj = c.ev(s.subject, w, rd)
                for arm in s.arms:
                    if any(c.ev(lab, w, rd) == subj for lab in arm.labels):
                        ex(arm.body)
                        return
                ex(s.default)
            else:
                ctx = max(c.sw(s.lhs), c.sw(s.rhs))
                v = c.ev(s.rhs, ctx, rd) & _mask(c.sw(s.lhs))
                for name, fm, bits in c.targets(s.lhs, v, rd):
                    local[name] = (rd(name) & ~fm) | bits

        ex(b.body)
        res = {n: local.get(n, 0) for n in out}
        block_cache[key] = res
        return res

    return {p.name: value(p.name) for p in m.outputs}


def _block_targets(s, out: set) -> None:
    if s is None:
        return
    if isinstance(s, Block):
        for x in s.stmts:
            _block_targets(x, out)
    elif isinstance(s, If):
        _block_targets(s.then, out)
        _block_targets(s.other, out)
    elif isinstance(s, Case):
        for arm in s.arms:
            _block_targets(arm.body, out)
        _block_targets(s.default, out)
    else:
        _lhs_names(s.lhs, out)


def _lhs_names(e, out: set) -> None:
    if isinstance(e, Concat):
        for p in e.parts:
            _lhs_names(p, out)
    else:
        out.add(e.name)


def exhaustive_points(widths: Iterable[Tuple[str, int]]):
    names = list(widths)
    total = sum(w for _, w in names)
    for x in range(1 << total):
        point = {}
        shift = 0
        for name, w in names:
            point[name] = (x >> shift) & _mask(w)
            shift += w
        yield point
