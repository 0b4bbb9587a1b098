"""Programs with procedures: parsing, rendering, pushdown translation,
flattening and cache-set slicing.

Program file format (one directive per line, ``#`` starts a comment)::

    assoc 4
    entry A
    proc A start A0 end A5
    edge A A0 A1 access a
    edge A A3 A4 call B
    edge A A1 A2 eps
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .psys import EPS, PushdownSystem, Rule

IDENT = re.compile(r"^[A-Za-z0-9_]+$")
BOTTOM = "_bot"


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: str  # "access" | "eps" | "call"
    arg: str | None = None  # block for access, callee for call

    def label_text(self) -> str:
        return self.kind if self.arg is None else f"{self.kind} {self.arg}"


@dataclass(frozen=True)
class Procedure:
    name: str
    start: str
    end: str
    edges: tuple = ()

    @property
    def vertices(self) -> tuple:
        seen = dict.fromkeys([self.start])
        for e in self.edges:
            seen.setdefault(e.src)
            seen.setdefault(e.dst)
        seen.setdefault(self.end)
        return tuple(seen)


@dataclass(frozen=True)
class AccessSite:
    proc: str
    src: str
    dst: str
    block: str

    @property
    def vertex(self) -> tuple:
        return (self.proc, self.src)


@dataclass(frozen=True)
class Program:
    procedures: dict
    entry: str
    assoc: int | None = None

    def __post_init__(self):
        if self.entry not in self.procedures:
            raise ProgramError(f"entry procedure {self.entry!r} is not defined")
        for proc in self.procedures.values():
            for e in proc.edges:
                if e.src == proc.end:
                    raise ProgramError(f"end vertex has successor: {proc.name} {e.src} -> {e.dst}")
                if e.kind == "call" and e.arg not in self.procedures:
                    raise ProgramError(f"call to unknown procedure {e.arg!r} in {proc.name}")
                if e.kind not in ("access", "eps", "call"):
                    raise ProgramError(f"unknown edge kind {e.kind!r}")

    def __hash__(self):
        return hash((self.entry, tuple(self.procedures.items())))

    @property
    def blocks(self) -> tuple:
        """Accessed blocks in order of first textual appearance."""
        out = {}
        for proc in self.procedures.values():
            for e in proc.edges:
                if e.kind == "access":
                    out.setdefault(e.arg)
        return tuple(out)

    @property
    def vertices(self) -> tuple:
        return tuple((p.name, v) for p in self.procedures.values() for v in p.vertices)

    @property
    def entry_vertex(self) -> tuple:
        return (self.entry, self.procedures[self.entry].start)

    def access_sites(self) -> list:
        return [AccessSite(p.name, e.src, e.dst, e.arg)
                for p in self.procedures.values() for e in p.edges if e.kind == "access"]

    def resolve_vertex(self, vertex) -> tuple:
        """Accept ``(proc, v)`` or a bare vertex name that is unique program-wide."""
        if isinstance(vertex, tuple):
            if vertex not in set(self.vertices):
                raise ProgramError(f"unknown vertex {vertex!r}")
            return vertex
        hits = [(p, v) for p, v in self.vertices if v == vertex]
        if len(hits) != 1:
            raise ProgramError(f"vertex {vertex!r} is unknown or ambiguous")
        return hits[0]


def parse_program(text: str) -> Program:
    assoc = None
    entry = None
    procs: dict = {}
    order: list = []
    edges: dict = {}
    pending = []

    def fail(lineno, msg):
        raise ProgramError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        for t in tok[1:]:
            if not IDENT.match(t):
                fail(lineno, f"bad identifier {t!r}")
        head = tok[0]
        if head == "assoc":
            if len(tok) != 2 or not tok[1].isdigit() or int(tok[1]) < 1:
                fail(lineno, "assoc expects a positive integer")
            assoc = int(tok[1])
        elif head == "entry":
            if len(tok) != 2:
                fail(lineno, "entry expects one procedure name")
            if entry is not None:
                fail(lineno, "duplicate entry")
            entry = tok[1]
        elif head == "proc":
            if len(tok) != 6 or tok[2] != "start" or tok[4] != "end":
                fail(lineno, "expected: proc <name> start <v> end <v>")
            if tok[1] in procs:
                fail(lineno, f"duplicate procedure {tok[1]!r}")
            procs[tok[1]] = (tok[3], tok[5])
            order.append(tok[1])
            edges[tok[1]] = {}
        elif head == "edge":
            if len(tok) < 5:
                fail(lineno, "expected: edge <proc> <src> <dst> <label>")
            name, src, dst, kind = tok[1:5]
            if kind in ("access", "call"):
                if len(tok) != 6:
                    fail(lineno, f"{kind} expects one argument")
                arg = tok[5]
            elif kind == "eps":
                if len(tok) != 5:
                    fail(lineno, "eps takes no argument")
                arg = None
            else:
                fail(lineno, f"unknown edge label {kind!r}")
            pending.append((lineno, name, Edge(src, dst, kind, arg)))
        else:
            fail(lineno, f"unknown directive {head!r}")

    if entry is None:
        raise ProgramError("missing entry")
    for lineno, name, e in pending:
        if name not in procs:
            fail(lineno, f"edge for unknown procedure {name!r}")
        start, end = procs[name]
        if e.src == end:
            fail(lineno, f"end vertex has successor ({name} {e.src})")
        if e.kind == "call" and e.arg not in procs:
            fail(lineno, f"call to unknown procedure {e.arg!r}")
        if e in edges[name]:
            fail(lineno, f"duplicate edge {name} {e.src} {e.dst} {e.label_text()}")
        edges[name][e] = None
    if entry not in procs:
        raise ProgramError(f"missing entry: procedure {entry!r} is not defined")
    procedures = {n: Procedure(n, procs[n][0], procs[n][1], tuple(edges[n])) for n in order}
    return Program(procedures, entry, assoc)


def render_program(p: Program) -> str:
    lines = []
    if p.assoc is not None:
        lines.append(f"assoc {p.assoc}")
    lines.append(f"entry {p.entry}")
    for proc in p.procedures.values():
        lines.append(f"proc {proc.name} start {proc.start} end {proc.end}")
    for proc in p.procedures.values():
        for e in proc.edges:
            lines.append(f"edge {proc.name} {e.src} {e.dst} {e.label_text()}")
    return "\n".join(lines) + "\n"


def return_symbol(proc: str, e: Edge) -> tuple:
    return ("ret", proc, e.src, e.dst, e.arg)


def to_pushdown(p: Program, finals: Iterable | None = None) -> PushdownSystem:
    """Pushdown system over locations ``(proc, vertex)``.

    One return symbol per call edge sits on top of ``BOTTOM``. Final
    locations default to the end vertex of the entry procedure.
    """
    locations = frozenset(p.vertices)
    gamma = {BOTTOM}
    for proc in p.procedures.values():
        for e in proc.edges:
            if e.kind == "call":
                gamma.add(return_symbol(proc.name, e))
    gamma = frozenset(gamma)
    rules = []
    for proc in p.procedures.values():
        for e in proc.edges:
            u, v = (proc.name, e.src), (proc.name, e.dst)
            if e.kind == "call":
                callee = p.procedures[e.arg]
                rho = return_symbol(proc.name, e)
                for g in gamma:
                    rules.append(Rule(u, g, EPS, (callee.name, callee.start), (rho, g)))
                rules.append(Rule((callee.name, callee.end), rho, EPS, v, ()))
            else:
                label = e.arg if e.kind == "access" else EPS
                for g in gamma:
                    rules.append(Rule(u, g, label, v, (g,)))
    if finals is None:
        finals = [(p.entry, p.procedures[p.entry].end)]
    return PushdownSystem(locations, frozenset(p.blocks), gamma, tuple(rules),
                          p.entry_vertex, frozenset(finals), (BOTTOM,))


@dataclass(frozen=True)
class FlatEdge:
    src: tuple
    dst: tuple
    kind: str  # "access" | "eps" | "call" | "return"
    block: str | None = None


@dataclass(frozen=True)
class FlatGraph:
    vertices: tuple
    edges: tuple
    entry: tuple
    blocks: tuple = field(default=())

    def successors(self):
        out = {v: [] for v in self.vertices}
        for e in self.edges:
            out[e.src].append(e)
        return out

    def predecessors(self):
        inc = {v: [] for v in self.vertices}
        for e in self.edges:
            inc[e.dst].append(e)
        return inc


def flatten(p: Program) -> FlatGraph:
    edges = []
    for proc in p.procedures.values():
        for e in proc.edges:
            u, v = (proc.name, e.src), (proc.name, e.dst)
            if e.kind == "call":
                callee = p.procedures[e.arg]
                edges.append(FlatEdge(u, (callee.name, callee.start), "call"))
                edges.append(FlatEdge((callee.name, callee.end), v, "return"))
            elif e.kind == "access":
                edges.append(FlatEdge(u, v, "access", e.arg))
            else:
                edges.append(FlatEdge(u, v, "eps"))
    return FlatGraph(p.vertices, tuple(edges), p.entry_vertex, p.blocks)


def slice_program(p: Program, kept: Iterable) -> Program:
    """Relabel accesses to blocks outside ``kept`` as epsilon edges."""
    kept = set(kept)
    procs = {}
    for name, proc in p.procedures.items():
        new = []
        for e in proc.edges:
            if e.kind == "access" and e.arg not in kept:
                e = Edge(e.src, e.dst, "eps")
            new.append(e)
        # relabeling can merge two formerly distinct edges; keep one
        procs[name] = Procedure(name, proc.start, proc.end, tuple(dict.fromkeys(new)))
    return Program(procs, p.entry, p.assoc)


def slice_flat(g: FlatGraph, kept: Iterable) -> FlatGraph:
    kept = set(kept)
    edges = []
    for e in g.edges:
        if e.kind == "access" and e.block not in kept:
            e = FlatEdge(e.src, e.dst, "eps")
        edges.append(e)
    return FlatGraph(g.vertices, tuple(dict.fromkeys(edges)), g.entry,
                     tuple(b for b in g.blocks if b in kept))


def doubling_program(n: int, block: str = "a") -> Program:
    """``f_0 .. f_n``: each ``f_i`` calls ``f_{i+1}`` twice, ``f_n`` accesses ``block`` once."""
    procs = {}
    for i in range(n):
        procs[f"f{i}"] = Procedure(f"f{i}", "s", "t", (
            Edge("s", "m", "call", f"f{i + 1}"),
            Edge("m", "t", "call", f"f{i + 1}"),
        ))
    procs[f"f{n}"] = Procedure(f"f{n}", "s", "t", (Edge("s", "t", "access", block),))
    return Program(procs, "f0")
