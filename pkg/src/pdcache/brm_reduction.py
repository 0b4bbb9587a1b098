"""Boolean register machines with procedure calls and the FIFO reduction.

Machine file format (``#`` comments)::

    registers 2
    proc 1 start s end t
    locals 1 2            # optional: registers saved across calls to proc 1
    edge 1 s u assign 1 1
    edge 1 u t guard 1 1
    edge 1 u t call 2

Procedures are numbered from 1; procedure 1 is the entry.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable

from .policy_sim import DEFAULT_BUDGET, FifoState, fifo_update, oracle_exist_hit
from .program import Edge, Procedure, Program, render_program
from .psys import EPS, ConfigAutomaton, Configuration, PushdownSystem, Rule, post_star
from .tabulation import BudgetExceeded

IDENT = re.compile(r"^[A-Za-z0-9_]+$")
BOTTOM = "_bot"


class BrmError(ValueError):
    pass


@dataclass(frozen=True)
class Guard:
    reg: int
    val: int

    def __str__(self):
        return f"guard {self.reg} {self.val}"


@dataclass(frozen=True)
class Assign:
    reg: int
    val: int

    def __str__(self):
        return f"assign {self.reg} {self.val}"


@dataclass(frozen=True)
class Call:
    proc: int

    def __str__(self):
        return f"call {self.proc}"


@dataclass(frozen=True)
class BrmEdge:
    src: str
    dst: str
    instr: object


@dataclass(frozen=True)
class BrmProc:
    index: int
    start: str
    end: str
    edges: tuple = ()
    locals: tuple = ()

    @property
    def vertices(self) -> tuple:
        seen = dict.fromkeys([self.start])
        for e in self.edges:
            seen.setdefault(e.src)
            seen.setdefault(e.dst)
        seen.setdefault(self.end)
        return tuple(seen)


@dataclass(frozen=True)
class Brm:
    registers: int
    procedures: dict = field(hash=False)

    def __post_init__(self):
        if self.registers < 1:
            raise BrmError("a machine needs at least one register")
        if 1 not in self.procedures:
            raise BrmError("procedure 1 (the entry) is not defined")
        for p in self.procedures.values():
            for i in p.locals:
                self._check_reg(i)
            for e in p.edges:
                if e.src == p.end:
                    raise BrmError(f"end vertex has successor: proc {p.index} {e.src}")
                if isinstance(e.instr, Call):
                    if e.instr.proc not in self.procedures:
                        raise BrmError(f"call to undeclared procedure {e.instr.proc}")
                elif isinstance(e.instr, (Guard, Assign)):
                    self._check_reg(e.instr.reg)
                    if e.instr.val not in (0, 1):
                        raise BrmError(f"register value must be 0 or 1, not {e.instr.val}")
                else:
                    raise BrmError(f"unknown instruction {e.instr!r}")

    def _check_reg(self, i):
        if not 1 <= i <= self.registers:
            raise BrmError(f"register index {i} out of range 1..{self.registers}")

    @property
    def final(self) -> tuple:
        return (1, self.procedures[1].end)

    @property
    def has_locals(self) -> bool:
        return any(p.locals for p in self.procedures.values())

    def edge_count(self) -> int:
        return sum(len(p.edges) for p in self.procedures.values())


def parse_brm(text: str) -> Brm:
    registers = None
    procs: dict = {}
    locals_: dict = {}
    pending = []

    def fail(lineno, msg):
        raise BrmError(f"line {lineno}: {msg}")

    def integer(lineno, tok):
        if not tok.isdigit():
            fail(lineno, f"expected a number, got {tok!r}")
        return int(tok)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        if head == "registers":
            if len(tok) != 2:
                fail(lineno, "expected: registers <r>")
            registers = integer(lineno, tok[1])
            if registers < 1:
                fail(lineno, "at least one register is required")
        elif head == "proc":
            if len(tok) != 6 or tok[2] != "start" or tok[4] != "end":
                fail(lineno, "expected: proc <idx> start <v> end <v>")
            idx = integer(lineno, tok[1])
            if idx < 1 or idx in procs:
                fail(lineno, f"bad or duplicate procedure index {idx}")
            for v in (tok[3], tok[5]):
                if not IDENT.match(v):
                    fail(lineno, f"bad vertex name {v!r}")
            procs[idx] = (tok[3], tok[5])
        elif head == "locals":
            if len(tok) < 2:
                fail(lineno, "expected: locals <idx> <reg>...")
            locals_[integer(lineno, tok[1])] = (lineno, tuple(integer(lineno, t) for t in tok[2:]))
        elif head == "edge":
            if len(tok) < 6:
                fail(lineno, "expected: edge <idx> <src> <dst> <instr> <args>")
            idx = integer(lineno, tok[1])
            src, dst, kind = tok[2], tok[3], tok[4]
            for v in (src, dst):
                if not IDENT.match(v):
                    fail(lineno, f"bad vertex name {v!r}")
            if kind in ("guard", "assign"):
                if len(tok) != 7:
                    fail(lineno, f"{kind} expects a register and a value")
                reg, val = integer(lineno, tok[5]), integer(lineno, tok[6])
                if val not in (0, 1):
                    fail(lineno, f"value must be 0 or 1, got {val}")
                instr = Guard(reg, val) if kind == "guard" else Assign(reg, val)
            elif kind == "call":
                if len(tok) != 6:
                    fail(lineno, "call expects one procedure index")
                instr = Call(integer(lineno, tok[5]))
            else:
                fail(lineno, f"unknown instruction {kind!r}")
            pending.append((lineno, idx, BrmEdge(src, dst, instr)))
        else:
            fail(lineno, f"unknown directive {head!r}")

    if registers is None:
        raise BrmError("missing 'registers' line")
    edges = {i: [] for i in procs}
    for lineno, idx, e in pending:
        if idx not in procs:
            fail(lineno, f"edge for undeclared procedure {idx}")
        if e.src == procs[idx][1]:
            fail(lineno, f"end vertex has successor ({e.src})")
        ins = e.instr
        if isinstance(ins, Call) and ins.proc not in procs:
            fail(lineno, f"call to undeclared procedure {ins.proc}")
        if isinstance(ins, (Guard, Assign)) and not 1 <= ins.reg <= registers:
            fail(lineno, f"register index {ins.reg} out of range 1..{registers}")
        edges[idx].append(e)
    for idx, (lineno, regs) in locals_.items():
        if idx not in procs:
            fail(lineno, f"locals for undeclared procedure {idx}")
        for i in regs:
            if not 1 <= i <= registers:
                fail(lineno, f"register index {i} out of range 1..{registers}")
    if 1 not in procs:
        raise BrmError("procedure 1 (the entry) is not defined")
    return Brm(registers, {i: BrmProc(i, s, t, tuple(edges[i]), locals_.get(i, (0, ()))[1])
                           for i, (s, t) in sorted(procs.items())})


def render_brm(m: Brm) -> str:
    lines = [f"registers {m.registers}"]
    for p in m.procedures.values():
        lines.append(f"proc {p.index} start {p.start} end {p.end}")
        if p.locals:
            lines.append(f"locals {p.index} " + " ".join(map(str, p.locals)))
    for p in m.procedures.values():
        for e in p.edges:
            lines.append(f"edge {p.index} {e.src} {e.dst} {e.instr}")
    return "\n".join(lines) + "\n"


# -- reachability ------------------------------------------------------------


def _set(regs: tuple, i: int, b: int) -> tuple:
    return regs[: i - 1] + (b,) + regs[i:]


def brm_pushdown(m: Brm, budget: int = DEFAULT_BUDGET) -> PushdownSystem:
    """Register values folded into control locations ``((proc, vertex), regs)``.

    A call pushes the return vertex together with the caller's values of the
    callee's local registers, which the matching return restores.
    """
    vectors = list(itertools.product((0, 1), repeat=m.registers))
    ret_syms = [BOTTOM]
    for p in m.procedures.values():
        for e in p.edges:
            if isinstance(e.instr, Call):
                n = len(m.procedures[e.instr.proc].locals)
                for saved in itertools.product((0, 1), repeat=n):
                    ret_syms.append(("ret", p.index, e.dst, e.instr.proc, saved))
    nverts = sum(len(p.vertices) for p in m.procedures.values())
    estimate = nverts * len(vectors) * len(ret_syms)
    if estimate > budget:
        raise BudgetExceeded(estimate, budget, "expanded locations x stack symbols")
    rules = []
    for p in m.procedures.values():
        for e in p.edges:
            u, v = (p.index, e.src), (p.index, e.dst)
            ins = e.instr
            for regs in vectors:
                if isinstance(ins, Call):
                    callee = m.procedures[ins.proc]
                    saved = tuple(regs[i - 1] for i in callee.locals)
                    sym = ("ret", p.index, e.dst, ins.proc, saved)
                    for g in ret_syms:
                        rules.append(Rule((u, regs), g, EPS, ((ins.proc, callee.start), regs), (sym, g)))
                    continue
                if isinstance(ins, Guard):
                    if regs[ins.reg - 1] != ins.val:
                        continue
                    out = regs
                else:
                    out = _set(regs, ins.reg, ins.val)
                for g in ret_syms:
                    rules.append(Rule((u, regs), g, EPS, (v, out), (g,)))
    for sym in ret_syms[1:]:
        _, caller, dst, callee_idx, saved = sym
        callee = m.procedures[callee_idx]
        for regs in vectors:
            out = regs
            for i, b in zip(callee.locals, saved):
                out = _set(out, i, b)
            rules.append(Rule(((callee_idx, callee.end), regs), sym, EPS, ((caller, dst), out), ()))
    locations = frozenset(((p.index, v), regs) for p in m.procedures.values()
                          for v in p.vertices for regs in vectors)
    start = ((1, m.procedures[1].start), vectors[0])
    return PushdownSystem(locations, frozenset(), frozenset(ret_syms), tuple(rules), start,
                          frozenset(), (BOTTOM,))


def brm_reachable(m: Brm, target: tuple | None = None, *, empty_stack: bool = False,
                  budget: int = DEFAULT_BUDGET) -> bool:
    """Is ``target`` (default: the end of procedure 1) reachable from vertex
    start of procedure 1 with all registers 0?

    With ``empty_stack`` only top-level visits count, i.e. procedure 1 has
    actually returned to nobody.
    """
    target = m.final if target is None else target
    if target[0] not in m.procedures or target[1] not in m.procedures[target[0]].vertices:
        raise BrmError(f"unknown control location {target!r}")
    pds = brm_pushdown(m, budget)
    reach = post_star(pds, ConfigAutomaton.from_configs([pds.initial_configuration], pds.locations))
    for regs in itertools.product((0, 1), repeat=m.registers):
        loc = (target, regs)
        if empty_stack:
            if reach.accepts(Configuration(loc, (BOTTOM,))):
                return True
        elif reach.nonempty_at(loc):
            return True
    return False


# -- transition encoding -----------------------------------------------------


def const(b: int) -> tuple:
    return ("const", b)


def var(i: int) -> tuple:
    return ("var", i)


def neg(e) -> tuple:
    return ("not", e)


def conj(a, b) -> tuple:
    return ("and", a, b)


def disj(a, b) -> tuple:
    return ("or", a, b)


def evaluate(e, regs: tuple) -> int:
    op = e[0]
    if op == "const":
        return e[1]
    if op == "var":
        return regs[e[1] - 1]
    if op == "not":
        return 1 - evaluate(e[1], regs)
    if op == "and":
        return evaluate(e[1], regs) & evaluate(e[2], regs)
    if op == "or":
        return evaluate(e[1], regs) | evaluate(e[2], regs)
    raise BrmError(f"unknown operator {op!r}")


def _reads(e) -> set:
    if e[0] == "var":
        return {e[1]}
    if e[0] == "const":
        return set()
    return set().union(*(_reads(x) for x in e[1:]))


def _check_expr(e, r):
    if not isinstance(e, tuple) or not e:
        raise BrmError(f"malformed expression {e!r}")
    op = e[0]
    arity = {"const": 1, "var": 1, "not": 1, "and": 2, "or": 2}.get(op)
    if arity is None or len(e) != arity + 1:
        raise BrmError(f"malformed expression {e!r}")
    if op == "const" and e[1] not in (0, 1):
        raise BrmError(f"bad constant {e[1]!r}")
    elif op == "var" and not 1 <= e[1] <= r:
        raise BrmError(f"register index {e[1]} out of range 1..{r}")
    elif op not in ("const", "var"):
        for x in e[1:]:
            _check_expr(x, r)


@dataclass(frozen=True)
class TransitionRelation:
    """Guard over current registers; ``updates`` maps register -> new value
    expression, all read in the pre-state.  Unlisted registers keep their value."""
    registers: int
    guard: tuple = ("const", 1)
    updates: tuple = ()  # ((reg, expr), ...)

    def __post_init__(self):
        _check_expr(self.guard, self.registers)
        seen = set()
        for reg, e in self.updates:
            if not 1 <= reg <= self.registers or reg in seen:
                raise BrmError(f"bad or repeated update target {reg}")
            seen.add(reg)
            _check_expr(e, self.registers)

    def image(self, regs: tuple) -> set:
        if not evaluate(self.guard, regs):
            return set()
        out = list(regs)
        for reg, e in self.updates:
            out[reg - 1] = evaluate(e, regs)
        return {tuple(out)}


@dataclass(frozen=True)
class Gadget:
    entry: str
    exit: str
    edges: tuple
    registers: int  # original plus fresh


class _Builder:
    def __init__(self, registers: int, prefix: str):
        self.registers = registers
        self.prefix = prefix
        self.count = 0
        self.edges = []

    def node(self) -> str:
        self.count += 1
        return f"{self.prefix}{self.count}"

    def fresh_reg(self) -> int:
        self.registers += 1
        return self.registers

    def branches(self, cur: str, alternatives) -> str:
        join = self.node()
        for instrs in alternatives:
            at = cur
            for k, ins in enumerate(instrs):
                nxt = join if k == len(instrs) - 1 else self.node()
                self.edges.append(BrmEdge(at, nxt, ins))
                at = nxt
        return join

    def operand(self, e, cur, alias):
        if e[0] == "var":
            return alias.get(e[1], e[1]), cur
        reg = self.fresh_reg()
        return reg, self.emit(e, reg, cur, alias)

    def emit(self, e, t: int, cur: str, alias: dict) -> str:
        """Store the value of ``e`` into register ``t``."""
        op = e[0]
        if op == "const":
            return self.branches(cur, [[Assign(t, e[1])]])
        if op == "var":
            x = alias.get(e[1], e[1])
            return self.branches(cur, [[Guard(x, 0), Assign(t, 0)], [Guard(x, 1), Assign(t, 1)]])
        if op == "not":
            x, cur = self.operand(e[1], cur, alias)
            return self.branches(cur, [[Guard(x, 0), Assign(t, 1)], [Guard(x, 1), Assign(t, 0)]])
        x, cur = self.operand(e[1], cur, alias)
        y, cur = self.operand(e[2], cur, alias)
        if op == "and":
            return self.branches(cur, [[Guard(x, 1), Guard(y, 1), Assign(t, 1)],
                                       [Guard(x, 0), Assign(t, 0)], [Guard(y, 0), Assign(t, 0)]])
        return self.branches(cur, [[Guard(x, 0), Guard(y, 0), Assign(t, 0)],
                                   [Guard(x, 1), Assign(t, 1)], [Guard(y, 1), Assign(t, 1)]])


def encode_transition(t: TransitionRelation, prefix: str = "t", first_fresh: int | None = None) -> Gadget:
    """Guard/assign-only subgraph realizing ``t``; one fresh register per
    operator node (plus snapshots where an update would clobber a register
    that a later update still reads)."""
    b = _Builder(t.registers if first_fresh is None else first_fresh - 1, prefix)
    entry = b.node()
    cur = entry
    g = t.guard
    if g == ("const", 1):
        pass
    elif g[0] == "var":
        cur = b.branches(cur, [[Guard(g[1], 1)]])
    elif g[0] == "not" and g[1][0] == "var":
        cur = b.branches(cur, [[Guard(g[1][1], 0)]])
    else:
        reg = b.fresh_reg()
        cur = b.emit(g, reg, cur, {})
        cur = b.branches(cur, [[Guard(reg, 1)]])
    alias: dict = {}
    ups = list(t.updates)
    for k, (reg, e) in enumerate(ups):
        if e == ("var", reg):
            continue
        if any(reg in _reads(e2) for _, e2 in ups[k + 1:]):
            snap = b.fresh_reg()
            cur = b.emit(("var", reg), snap, cur, {})
            alias[reg] = snap
    for reg, e in ups:
        cur = b.emit(e, reg, cur, alias)
    return Gadget(entry, cur, tuple(b.edges), b.registers)


def run_gadget(g: Gadget, regs: tuple) -> set:
    """Register vectors at the gadget exit, over all paths from ``regs``
    (padded with zeros for fresh registers)."""
    regs = tuple(regs) + (0,) * (g.registers - len(regs))
    out_edges: dict = {}
    for e in g.edges:
        out_edges.setdefault(e.src, []).append(e)
    seen = {(g.entry, regs)}
    stack = [(g.entry, regs)]
    result = set()
    while stack:
        v, x = stack.pop()
        if v == g.exit:
            result.add(x)
        for e in out_edges.get(v, ()):
            ins = e.instr
            if isinstance(ins, Guard):
                if x[ins.reg - 1] != ins.val:
                    continue
                y = x
            elif isinstance(ins, Assign):
                y = _set(x, ins.reg, ins.val)
            else:
                raise BrmError("gadgets contain no calls")
            if (e.dst, y) not in seen:
                seen.add((e.dst, y))
                stack.append((e.dst, y))
    return result


# -- local variables ---------------------------------------------------------


def eliminate_locals(m: Brm) -> Brm:
    """Save each procedure's locals on the call stack through wrapper
    procedures; calls to ``P`` go to its outermost wrapper."""
    procs = {i: p for i, p in m.procedures.items()}
    next_idx = max(procs) + 1
    outer = {}
    wrappers = {}
    for i, p in m.procedures.items():
        inner = i
        for reg in reversed(p.locals):
            idx = next_idx
            next_idx += 1
            edges = []
            for b in (0, 1):
                edges += [BrmEdge("start", f"u{b}", Guard(reg, b)),
                          BrmEdge(f"u{b}", f"q{b}", Call(inner)),
                          BrmEdge(f"q{b}", "return", Assign(reg, b))]
            wrappers[idx] = BrmProc(idx, "start", "return", tuple(edges))
            inner = idx
        outer[i] = inner
    out = {}
    for i, p in procs.items():
        edges = tuple(BrmEdge(e.src, e.dst, Call(outer[e.instr.proc])) if isinstance(e.instr, Call) else e
                      for e in p.edges)
        out[i] = BrmProc(i, p.start, p.end, edges)
    out.update(wrappers)
    return Brm(m.registers, out)


# -- FIFO reduction ----------------------------------------------------------


def a_block(i: int, b: int) -> str:
    return f"a{i}_{b}"


def e_block(i: int) -> str:
    return f"e{i}"


def phi(i: int, b: int) -> tuple:
    return (a_block(i, b), e_block(i), a_block(i, b))


def psi(i: int, b: int) -> tuple:
    return (e_block(i), a_block(i, b), e_block(i))


def prologue_word(r: int) -> tuple:
    word = [a_block(1, 0)]
    for i in range(2, r + 1):
        word += [e_block(i), a_block(i, 0)]
    return tuple(word)


def epilogue_words(r: int) -> tuple:
    part1 = tuple(x for i in range(1, r + 1) for x in psi(i, 0))
    part2 = []
    for i in range(1, r):
        part2 += [a_block(i, 0), f"g{i}", e_block(i + 1), f"f{i + 1}"]
    return part1, tuple(part2)


def gadget_columns(instr, r: int) -> list:
    """Per column, the alternative access words of a guard/assign gadget."""
    cols = []
    for c in range(1, r + 1):
        if c == instr.reg:
            cols.append([phi(c, instr.val) if isinstance(instr, Guard) else psi(c, instr.val)])
        else:
            cols.append([phi(c, 0), phi(c, 1)])
    return cols


def gadget_words(instr, r: int) -> list:
    return [sum(choice, ()) for choice in itertools.product(*gadget_columns(instr, r))]


def encode_registers(values: Iterable[int]) -> tuple:
    """Access word whose FIFO replay from the empty cache yields the
    delay-line encoding of ``values``."""
    values = tuple(values)
    word = [a_block(1, values[0])]
    for i in range(2, len(values) + 1):
        word += [e_block(i), a_block(i, values[i - 1])]
    return tuple(word)


def well_formed_state(values: Iterable[int]) -> FifoState:
    values = tuple(values)
    s = FifoState((), 2 * len(values) - 1)
    for x in encode_registers(values):
        s = fifo_update(s, x)
    return s


def decode_state(s: FifoState, r: int) -> tuple | None:
    """Register vector encoded by ``s``, or None if not well-formed."""
    for values in itertools.product((0, 1), repeat=r):
        if well_formed_state(values) == s:
            return values
    return None


@dataclass(frozen=True)
class FifoInstance:
    program: Program
    assoc: int
    registers: int  # after padding
    initial: tuple
    final: tuple
    query_block: str
    padded: bool = False

    def render(self) -> str:
        text = render_program(self.program)
        return text + (f"# initial {self.initial[0]}.{self.initial[1]}\n"
                       f"# final {self.final[0]}.{self.final[1]}\n"
                       f"# query exist-hit {self.query_block} at {self.final[0]}.{self.final[1]} "
                       f"(fifo, empty initial cache)\n")


def fifo_reduction(m: Brm, pad_single_register: bool = True) -> FifoInstance:
    """Program over FIFO with ``K = 2r - 1`` where ``a{r}_0`` can be cached at
    ``main.F_f`` iff the machine reaches the end of procedure 1 at top level.

    With one register the construction degenerates: K = 1 and the epilogue
    ends on ``e1``, so the query block is never cached.  By default such
    machines are padded with an unused second register.
    """
    if m.has_locals:
        raise BrmError("eliminate locals first")
    r = m.registers
    padded = False
    if r == 1 and pad_single_register:
        r, padded = 2, True
    counter = itertools.count(1)

    def fresh():
        return f"t{next(counter)}"

    def chain(edges, src, word, dst):
        at = src
        for k, x in enumerate(word):
            nxt = dst if k == len(word) - 1 else fresh()
            edges.append(Edge(at, nxt, "access", x))
            at = nxt
        if not word:
            edges.append(Edge(src, dst, "eps"))

    procs = {}
    main = []
    chain(main, "I_f", prologue_word(r), "I_r")
    main.append(Edge("I_r", "F_r", "call", "P1"))
    part1, part2 = epilogue_words(r)
    chain(main, "F_r", part1, "F_a")
    chain(main, "F_a", part2, "F_f")
    procs["main"] = Procedure("main", "I_f", "F_f", tuple(main))
    for p in m.procedures.values():
        edges = []
        for e in p.edges:
            src, dst = f"v_{e.src}", f"v_{e.dst}"
            if isinstance(e.instr, Call):
                edges.append(Edge(src, dst, "call", f"P{e.instr.proc}"))
                continue
            cols = gadget_columns(e.instr, r)
            at = src
            for c, alts in enumerate(cols):
                nxt = dst if c == len(cols) - 1 else fresh()
                for word in alts:
                    chain(edges, at, word, nxt)
                at = nxt
        procs[f"P{p.index}"] = Procedure(f"P{p.index}", f"v_{p.start}", f"v_{p.end}", tuple(edges))
    k = 2 * r - 1
    prog = Program(procs, "main", k)
    return FifoInstance(prog, k, r, ("main", "I_f"), ("main", "F_f"), a_block(r, 0), padded)


@dataclass(frozen=True)
class ValidationReport:
    machine_reachable: bool
    cache_exist_hit: bool
    registers: int
    assoc: int
    machine_edges: int
    instance_edges: int

    @property
    def match(self) -> bool:
        return self.machine_reachable == self.cache_exist_hit


def validate_reduction(m: Brm, budget: int = DEFAULT_BUDGET, pad_single_register: bool = True) -> ValidationReport:
    """Compare machine reachability with the FIFO exist-hit answer on the
    generated instance (empty initial cache)."""
    plain = eliminate_locals(m) if m.has_locals else m
    machine = brm_reachable(m, empty_stack=True, budget=budget)
    inst = fifo_reduction(plain, pad_single_register)
    cache = oracle_exist_hit(inst.program, inst.final, inst.query_block, "fifo", inst.assoc, "empty", budget)
    n_edges = sum(len(p.edges) for p in inst.program.procedures.values())
    return ValidationReport(machine, cache, inst.registers, inst.assoc, m.edge_count(), n_edges)
