"""Context-sensitive reachability for programs decorated with a finite state.

A program is run together with an auxiliary finite state (a cache state, an
automaton state, ...) that evolves on every access edge.  Reachable pairs
``(vertex, aux)`` under exact call/return matching are computed by the
classical summary-edge tabulation: a path edge ``(proc, aux at entry,
vertex, aux)`` records a same-level run inside ``proc``; summaries map an
entry state of a procedure to its exit states.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Callable, Hashable, Iterable


class BudgetExceeded(RuntimeError):
    def __init__(self, size: int, budget: int, what: str = "product locations"):
        super().__init__(f"state space exceeds budget: at least {size} {what} (budget {budget})")
        self.size = size
        self.budget = budget


class Tabulation:
    """Reachable ``(vertex, aux)`` pairs of ``program`` from the entry vertex.

    ``step(aux, block)`` returns the successor aux states for an access to
    ``block``; epsilon, call and return edges leave ``aux`` unchanged.
    """

    def __init__(self, program, initial: Iterable[Hashable], step: Callable,
                 budget: int | None = None, track: bool = False):
        self.program = program
        self.step = step
        self.budget = budget
        self.track = track
        self.out = {name: defaultdict(list) for name in program.procedures}
        for name, proc in program.procedures.items():
            for e in proc.edges:
                self.out[name][e.src].append(e)
        self.path_edges: set = set()
        self.prov: dict = {}
        self.entry_origin: dict = {}
        self.reach: dict = defaultdict(set)
        self._run(list(initial))

    def _add(self, pe, why, work):
        if pe in self.path_edges:
            return
        self.path_edges.add(pe)
        if self.budget is not None and len(self.path_edges) > self.budget:
            raise BudgetExceeded(len(self.path_edges), self.budget)
        if self.track:
            self.prov[pe] = why
        self.reach[(pe[0], pe[2])].add(pe[3])
        work.append(pe)

    def _run(self, initial):
        prog = self.program
        entry = prog.procedures[prog.entry]
        callers = defaultdict(list)
        summaries = defaultdict(dict)
        work = []
        for x in initial:
            key = (entry.name, x)
            self.entry_origin.setdefault(key, None)
            self._add((entry.name, x, entry.start, x), ("init",), work)
        while work:
            pe = work.pop()
            name, e0, v, x = pe
            proc = prog.procedures[name]
            for edge in self.out[name].get(v, ()):
                if edge.kind == "access":
                    for y in self.step(x, edge.arg):
                        self._add((name, e0, edge.dst, y), ("intra", pe, edge), work)
                elif edge.kind == "eps":
                    self._add((name, e0, edge.dst, x), ("intra", pe, edge), work)
                else:
                    callee = prog.procedures[edge.arg]
                    key = (callee.name, x)
                    callers[key].append((pe, edge))
                    if key not in self.entry_origin:
                        self.entry_origin[key] = (pe, edge)
                        self._add((callee.name, x, callee.start, x), ("enter",), work)
                    for y, exit_pe in list(summaries[key].items()):
                        self._add((name, e0, edge.dst, y), ("call", pe, edge, exit_pe), work)
            if v == proc.end:
                key = (name, e0)
                if x not in summaries[key]:
                    summaries[key][x] = pe
                    for cpe, edge in list(callers[key]):
                        self._add((cpe[0], cpe[1], edge.dst, x), ("call", cpe, edge, pe), work)

    # -- witnesses --------------------------------------------------------

    def find(self, vertex, accept: Callable[[Hashable], bool]):
        """Some path edge at ``vertex`` whose aux satisfies ``accept``."""
        for pe in sorted(self.path_edges, key=repr):
            if (pe[0], pe[2]) == vertex and accept(pe[3]):
                return pe
        return None

    def _body(self, pe, limit):
        items = []
        while True:
            why = self.prov[pe]
            if why[0] in ("init", "enter"):
                break
            if why[0] == "intra":
                items.append(("edge", pe[0], why[2]))
                pe = why[1]
            else:
                _, cpe, edge, exit_pe = why
                items.append(("return", pe[0], edge))
                items.append(("sub", exit_pe))
                items.append(("call", pe[0], edge))
                pe = cpe
        items.reverse()
        out = []
        for it in items:
            if it[0] == "sub":
                out.extend(self._body(it[1], limit))
            else:
                out.append(it)
            if len(out) > limit:
                raise BudgetExceeded(len(out), limit, "trace steps")
        return out

    def trace(self, pe, limit: int = 100000) -> list:
        """Events from the program entry to ``pe``: ``(kind, proc, edge)`` with
        kind in ``edge`` / ``call`` / ``return``."""
        if not self.track:
            raise ValueError("tabulation was run without provenance tracking")
        segments = [self._body(pe, limit)]
        key = (pe[0], pe[1])
        while self.entry_origin.get(key) is not None:
            cpe, edge = self.entry_origin[key]
            segments.append([("call", cpe[0], edge)])
            segments.append(self._body(cpe, limit))
            key = (cpe[0], cpe[1])
        events = []
        for seg in reversed(segments):
            events.extend(seg)
        return events


def trace_vertices(program, events) -> list:
    """Vertex sequence ``(proc, vertex)`` visited by a trace of events."""
    verts = [program.entry_vertex]
    for kind, proc, edge in events:
        if kind == "edge":
            verts.append((proc, edge.dst))
        elif kind == "call":
            callee = program.procedures[edge.arg]
            verts.append((callee.name, callee.start))
        else:
            verts.append((proc, edge.dst))
    return verts


def trace_word(events) -> list:
    return [edge.arg for kind, _, edge in events if kind == "edge" and edge.kind == "access"]
