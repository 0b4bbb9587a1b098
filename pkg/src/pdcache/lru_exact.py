"""Exact LRU classification by backtracking over first-occurrence sequences.

A block ``a`` is cached at ``q1`` after a run from the empty cache iff the
run contains an ``a`` access followed by fewer than K distinct blocks.  The
search guesses those blocks in order of first appearance: for a candidate
sequence ``s`` the program is intersected with the automaton for
``?* a Z(s)`` and pushdown reachability decides whether ``q1`` can be
reached.  Extending ``s`` by one letter only adds one layer of product
states, so each search node computes the configurations of its own layer
from its parent's.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .policy_sim import (ALWAYS_HIT, ALWAYS_MISS, UNKNOWN, UNREACHABLE, Classification,
                         LruState, is_hit, lru_update)
from .program import AccessSite, Program, to_pushdown
from .psys import (EPS, WILDCARD, ConfigAutomaton, Configuration, Nfa, PdsError,
                   PushdownSystem, Rule, intersect, post_star, pre_star, product_with_nfa)
from .tabulation import Tabulation, trace_vertices, trace_word


def first_occurrences(word: Iterable) -> tuple:
    seen = {}
    for c in word:
        seen.setdefault(c)
    return tuple(seen)


def _check_distinct(s):
    if len(set(s)) != len(s):
        raise PdsError(f"sequence {s} repeats a letter")


def z_automaton(s: Iterable, tail: str = "closed", tail_letters: Iterable | None = None) -> Nfa:
    """Automaton for words whose first-occurrence sequence is ``s``.

    With ``tail="open"`` the last state also loops on every letter (or only
    on ``tail_letters`` when given).
    """
    s = tuple(s)
    _check_distinct(s)
    n = len(s)
    trans = set()
    for i in range(n):
        trans.add((i, s[i], i + 1))
    for i in range(1, n + 1):
        for c in s[:i]:
            trans.add((i, c, i))
    alphabet = set(s)
    if tail == "open":
        if tail_letters is None:
            trans.add((n, WILDCARD, n))
        else:
            for c in tail_letters:
                trans.add((n, c, n))
                alphabet.add(c)
    elif tail != "closed":
        raise ValueError(f"tail must be 'closed' or 'open', not {tail!r}")
    return Nfa(frozenset(range(n + 1)), frozenset(alphabet), frozenset(trans), 0, frozenset({n}))


def anchored_automaton(a, s: Iterable, tail: str = "closed", tail_letters=None) -> Nfa:
    """``?* a Z(s)``; the anchor state is ``"pre"``."""
    z = z_automaton(s, tail, tail_letters)
    trans = set(z.transitions) | {("pre", WILDCARD, "pre"), ("pre", a, 0)}
    return Nfa(z.states | {"pre"}, z.alphabet | {a}, frozenset(trans), "pre", z.accepting)


@dataclass
class ExistResult:
    holds: bool
    disjunct: int | None = None  # 1: no anchoring access, 2: anchored on a last access of a
    sequence: tuple | None = None
    witness: dict | None = None

    def __bool__(self):
        return self.holds


@dataclass
class SearchStats:
    counts: Counter = field(default_factory=Counter)

    def __getitem__(self, key):
        return self.counts[key]


class LruAnalyzer:
    """Exact exist-hit / exist-miss queries on one program.

    ``prune`` intersects every layer with the configurations that can still
    reach the query vertex; ``incremental`` computes each layer from its
    parent instead of re-solving the whole product.  Neither changes answers.
    """

    def __init__(self, program: Program, assoc: int, mode: str = "empty", *,
                 prune: bool = True, incremental: bool = True, stats: SearchStats | None = None):
        if assoc < 1:
            raise ValueError("associativity must be positive")
        if mode not in ("empty", "arbitrary"):
            raise ValueError(f"unknown initial mode {mode!r}")
        self.program = program
        self.assoc = assoc
        self.mode = mode
        self.prune = prune
        self.incremental = incremental
        self.stats = stats if stats is not None else SearchStats()
        self.pds = to_pushdown(program)
        self.locations = self.pds.locations
        self.init = ConfigAutomaton.from_configs([self.pds.initial_configuration], self.locations)
        self._cache: dict = {}

    # -- shared pushdown queries ---------------------------------------------

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def reach_all(self) -> ConfigAutomaton:
        return self._memo("reach", lambda: post_star(self.pds, self.init))

    def reachable(self, vertex) -> bool:
        return self.reach_all.nonempty_at(self.program.resolve_vertex(vertex))

    def restricted(self, letters) -> PushdownSystem:
        letters = frozenset(letters)
        return self._memo(("restrict", letters), lambda: self.pds.restrict(letters))

    def coreach(self, q1, avoid=None) -> ConfigAutomaton:
        """Configurations that reach ``q1`` without reading ``avoid``."""
        def build():
            letters = [b for b in self.program.blocks if b != avoid]
            target = ConfigAutomaton.any_stack({q1}, self.pds.stack_alphabet, self.locations)
            return pre_star(self.restricted(letters), target)
        return self._memo(("coreach", q1, avoid), build)

    def _two_layer(self, letter, allowed: frozenset) -> PushdownSystem:
        def build():
            rules = []
            for r in self.pds.rules:
                if r.label == letter and r.label is not EPS:
                    rules.append(Rule((r.src, 0), r.top, r.label, (r.dst, 1), r.push))
                if r.label is EPS or r.label in allowed:
                    rules.append(Rule((r.src, 1), r.top, r.label, (r.dst, 1), r.push))
            locs = frozenset((q, k) for q in self.locations for k in (0, 1))
            return PushdownSystem(locs, self.pds.alphabet, self.pds.stack_alphabet, tuple(rules))
        return self._memo(("two", letter, allowed), build)

    def _step_layer(self, prev: ConfigAutomaton, letter, allowed) -> ConfigAutomaton:
        """Configurations after one ``letter`` access from ``prev`` followed by
        accesses restricted to ``allowed``."""
        allowed = frozenset(allowed)
        pds = self._two_layer(letter, allowed)
        start = prev.relabel_entries({q: (q, 0) for q in prev.locations})
        out = post_star(pds, start)
        return out.relabel_entries({(q, 1): q for q in self.locations})

    def _product_layer(self, nfa: Nfa, state) -> ConfigAutomaton:
        prod = product_with_nfa(self.pds, nfa)
        start = ConfigAutomaton.from_configs(
            [Configuration((self.pds.initial_location, nfa.initial), self.pds.initial_stack)],
            prod.locations)
        out = post_star(prod, start)
        return out.relabel_entries({(q, state): q for q in self.locations})

    # -- backtracking --------------------------------------------------------

    def _search(self, first, extend, letters, max_len, win, prune_with):
        """Depth-first search over sequences of distinct ``letters``."""
        self.stats.counts["searches"] += 1

        def clip(layer):
            return intersect(layer, prune_with) if self.prune else layer

        def rec(s, layer):
            self.stats.counts["nodes"] += 1
            if layer.is_empty():
                return None
            if win(s, layer):
                return s
            if len(s) >= max_len:
                return None
            for c in letters:
                if c in s:
                    continue
                found = rec(s + (c,), clip(extend(s, layer, c)))
                if found is not None:
                    return found
            return None

        return rec((), clip(first))

    def _anchored_first(self, a):
        if self.incremental:
            return self._step_layer(self.reach_all, a, ())
        return self._product_layer(anchored_automaton(a, ()), 0)

    def _anchored_extend(self, a):
        def extend(s, layer, c):
            if self.incremental:
                return self._step_layer(layer, c, set(s) | {c})
            return self._product_layer(anchored_automaton(a, s + (c,)), len(s) + 1)
        return extend

    def exist_hit(self, q1, a, witness: bool = False) -> ExistResult:
        q1 = self.program.resolve_vertex(q1)
        k = self.assoc
        letters = [b for b in self.program.blocks if b != a]
        won = None
        if a in self.program.blocks:
            cor = self.coreach(q1, avoid=a)
            won = self._search(self._anchored_first(a), self._anchored_extend(a), letters, k - 1,
                               lambda s, layer: layer.nonempty_at(q1), cor)
        if won is not None:
            res = ExistResult(True, 2, won)
        elif self.mode == "arbitrary":
            won = self._search_unanchored(q1, k - 1)
            res = ExistResult(True, 1, won) if won is not None else ExistResult(False)
        else:
            res = ExistResult(False)
        if witness and res.holds:
            res.witness = self.witness(q1, a, res, hit=True)
        return res

    def _search_unanchored(self, q1, max_len):
        letters = list(self.program.blocks)
        cor = self.coreach(q1)
        if self.incremental:
            first = post_star(self.restricted(()), self.init)

            def extend(s, layer, c):
                return self._step_layer(layer, c, set(s) | {c})
        else:
            first = self._product_layer(z_automaton(()), 0)

            def extend(s, layer, c):
                return self._product_layer(z_automaton(s + (c,)), len(s) + 1)
        return self._search(first, extend, letters, max_len,
                            lambda s, layer: layer.nonempty_at(q1), cor)

    def exist_miss(self, q1, a, witness: bool = False) -> ExistResult:
        q1 = self.program.resolve_vertex(q1)
        k = self.assoc
        avoid = [b for b in self.program.blocks if b != a]
        b_reach = self._memo(("reach_without", a), lambda: post_star(self.restricted(avoid), self.init))
        if b_reach.nonempty_at(q1):
            res = ExistResult(True, 1, None)
        elif a not in self.program.blocks:
            res = ExistResult(False)
        else:
            cor = self.coreach(q1, avoid=a)
            won = self._search(self._anchored_first(a), self._anchored_extend(a), avoid, k,
                               lambda s, layer: len(s) == k and not intersect(layer, cor).is_empty(),
                               cor)
            res = ExistResult(True, 2, won) if won is not None else ExistResult(False)
        if witness and res.holds:
            res.witness = self.witness(q1, a, res, hit=False)
        return res

    # -- witnesses -----------------------------------------------------------

    def witness(self, q1, a, res: ExistResult, hit: bool) -> dict:
        """A concrete run for a positive answer: initial cache, access word and
        vertex trace ending at ``q1``."""
        others = [b for b in self.program.blocks if b != a]
        if hit and res.disjunct == 1:
            nfa = z_automaton(res.sequence)
            initial = (a,)
        elif hit:
            nfa = anchored_automaton(a, res.sequence)
            initial = ()
        elif res.disjunct == 1:
            nfa = Nfa(frozenset({0}), frozenset(others), frozenset((0, b, 0) for b in others), 0, frozenset({0}))
            initial = ()
        else:
            nfa = anchored_automaton(a, res.sequence, "open", others)
            initial = ()
        tab = Tabulation(self.program, [nfa.initial], lambda z, b: nfa.step(z, b), track=True)
        pe = tab.find(q1, lambda z: z in nfa.accepting)
        if pe is None:
            raise AssertionError("search answer has no concrete run")
        events = tab.trace(pe)
        return {
            "sequence": None if res.sequence is None else list(res.sequence),
            "initial_cache": list(initial),
            "word": trace_word(events),
            "vertices": [f"{p}.{v}" for p, v in trace_vertices(self.program, events)],
        }

    # -- classification ------------------------------------------------------

    def classify_site(self, site: AccessSite, witnesses: bool = False) -> Classification:
        q1 = site.vertex
        if not self.reachable(q1):
            return Classification(UNREACHABLE, "reachability")
        self.stats.counts["exact_sites"] += 1
        miss = self.exist_miss(q1, site.block, witness=witnesses)
        hit = self.exist_hit(q1, site.block, witness=witnesses)
        if not miss:
            return Classification(ALWAYS_HIT, "exact")
        if not hit:
            return Classification(ALWAYS_MISS, "exact")
        wit = {"hit": hit.witness, "miss": miss.witness} if witnesses else {
            "hit": {"sequence": list(hit.sequence)}, "miss": {"sequence": None if miss.sequence is None else list(miss.sequence)}}
        return Classification(UNKNOWN, "exact", wit)


def exist_hit(p: Program, q1, a, assoc: int, mode: str = "empty", **kw) -> ExistResult:
    witness = kw.pop("witness", True)
    return LruAnalyzer(p, assoc, mode, **kw).exist_hit(q1, a, witness=witness)


def exist_miss(p: Program, q1, a, assoc: int, mode: str = "empty", **kw) -> ExistResult:
    witness = kw.pop("witness", True)
    return LruAnalyzer(p, assoc, mode, **kw).exist_miss(q1, a, witness=witness)


def classify_exact(p: Program, assoc: int, mode: str = "empty", sites: Iterable[AccessSite] | None = None,
                   *, prune: bool = True, incremental: bool = True, witnesses: bool = False,
                   stats: SearchStats | None = None, analyzer: LruAnalyzer | None = None) -> dict:
    an = analyzer or LruAnalyzer(p, assoc, mode, prune=prune, incremental=incremental, stats=stats)
    if sites is None:
        sites = p.access_sites()
    return {site: an.classify_site(site, witnesses) for site in sites}


def replay_witness(w: dict, assoc: int) -> LruState:
    """LRU state at the end of a witness run."""
    s = LruState(tuple(w["initial_cache"]), assoc)
    for b in w["word"]:
        s = lru_update(s, b)
    return s


def witness_confirms(w: dict, block, assoc: int, hit: bool) -> bool:
    return is_hit(replay_witness(w, assoc), block) == hit
