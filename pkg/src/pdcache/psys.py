"""Pushdown systems, regular configuration sets and saturation.

Configurations are ``(location, stack)`` with the stack written top first.
Sets of configurations are represented by :class:`ConfigAutomaton`
(P-automata): one entry state per control location, transitions labeled by
stack symbols (or ``None`` for epsilon).

``post_star`` and ``pre_star`` implement the classical saturation
procedures for pushdown systems in the normal form where every rule pushes
at most two symbols.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Iterator

EPS = None


class WildcardType:
    __slots__ = ()

    def __repr__(self) -> str:
        return "?"

    def __reduce__(self):
        return "WILDCARD"


WILDCARD = WildcardType()


class PdsError(ValueError):
    pass


@dataclass(frozen=True)
class State:
    """Internal automaton state; never equal to a control location."""

    tag: str
    key: Hashable

    def __repr__(self) -> str:
        return f"<{self.tag}:{self.key!r}>"


@dataclass(frozen=True)
class Rule:
    src: Hashable
    top: Hashable
    label: Hashable | None
    dst: Hashable
    push: tuple = ()

    def __str__(self) -> str:
        lab = "eps" if self.label is EPS else str(self.label)
        return f"({self.src},{self.top}) -{lab}-> ({self.dst},{' '.join(map(str, self.push)) or 'ε'})"


@dataclass(frozen=True)
class Configuration:
    location: Hashable
    stack: tuple = ()


@dataclass(frozen=True)
class PushdownSystem:
    locations: frozenset
    alphabet: frozenset
    stack_alphabet: frozenset
    rules: tuple
    initial_location: Hashable = None
    final_locations: frozenset = frozenset()
    initial_stack: tuple = ()

    def __post_init__(self):
        for name in ("locations", "alphabet", "stack_alphabet", "final_locations"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "initial_stack", tuple(self.initial_stack))
        for r in self.rules:
            if r.src not in self.locations or r.dst not in self.locations:
                raise PdsError(f"rule {r} references an undeclared location")
            if r.top not in self.stack_alphabet or any(g not in self.stack_alphabet for g in r.push):
                raise PdsError(f"rule {r} references an undeclared stack symbol")
            if r.label is not EPS and r.label not in self.alphabet:
                raise PdsError(f"rule {r} uses a letter outside the word alphabet")
        if self.initial_location is not None and self.initial_location not in self.locations:
            raise PdsError("initial location is not declared")
        if not self.final_locations <= self.locations:
            raise PdsError("final locations must be declared locations")

    @property
    def initial_configuration(self) -> Configuration:
        return Configuration(self.initial_location, self.initial_stack)

    def with_finals(self, finals: Iterable) -> "PushdownSystem":
        return PushdownSystem(
            self.locations, self.alphabet, self.stack_alphabet, self.rules,
            self.initial_location, frozenset(finals), self.initial_stack,
        )

    def restrict(self, letters: Iterable) -> "PushdownSystem":
        """Keep epsilon rules and rules whose letter is in ``letters``."""
        keep = frozenset(letters)
        rules = tuple(r for r in self.rules if r.label is EPS or r.label in keep)
        return PushdownSystem(
            self.locations, self.alphabet, self.stack_alphabet, rules,
            self.initial_location, self.final_locations, self.initial_stack,
        )

    @cached_property
    def normalized(self) -> "PushdownSystem":
        """Equivalent system whose rules push at most two symbols."""
        if all(len(r.push) <= 2 for r in self.rules):
            return self
        locations = set(self.locations)
        rules = []
        counter = 0
        for r in self.rules:
            if len(r.push) <= 2:
                rules.append(r)
                continue
            # (p,g) -> (p', w1..wn) becomes a chain through fresh locations that
            # push w_n, w_{n-1}, ... bottom-up; the letter is read on the first step.
            w = r.push
            fresh = []
            for _ in range(len(w) - 2):
                loc = State("norm", counter)
                counter += 1
                fresh.append(loc)
                locations.add(loc)
            # first step: replace g by w_{n-1} w_n (keeps the bottom two symbols)
            rules.append(Rule(r.src, r.top, r.label, fresh[0], (w[-2], w[-1])))
            for k, loc in enumerate(fresh):
                sym = w[-2 - k]
                nxt = fresh[k + 1] if k + 1 < len(fresh) else r.dst
                rules.append(Rule(loc, sym, EPS, nxt, (w[-3 - k], sym)))
        return PushdownSystem(
            frozenset(locations), self.alphabet, self.stack_alphabet, tuple(rules),
            self.initial_location, self.final_locations, self.initial_stack,
        )

    def successors(self, config: Configuration) -> Iterator[tuple]:
        """One-step successors ``(label, Configuration)``; used by explicit searches."""
        if not config.stack:
            return
        top, rest = config.stack[0], config.stack[1:]
        for r in self._by_head.get((config.location, top), ()):
            yield r.label, Configuration(r.dst, r.push + rest)

    @cached_property
    def _by_head(self) -> dict:
        idx = defaultdict(list)
        for r in self.rules:
            idx[(r.src, r.top)].append(r)
        return idx


@dataclass(frozen=True)
class ConfigAutomaton:
    """P-automaton: accepts ``(q, w)`` iff ``w`` leads from entry ``q`` to an accepting state."""

    locations: frozenset
    transitions: frozenset
    accepting: frozenset

    def __post_init__(self):
        object.__setattr__(self, "locations", frozenset(self.locations))
        object.__setattr__(self, "transitions", frozenset(self.transitions))
        object.__setattr__(self, "accepting", frozenset(self.accepting))

    # -- constructors -----------------------------------------------------

    @classmethod
    def empty(cls, locations: Iterable) -> "ConfigAutomaton":
        return cls(frozenset(locations), frozenset(), frozenset())

    @classmethod
    def from_configs(cls, configs: Iterable[Configuration], locations: Iterable) -> "ConfigAutomaton":
        locations = frozenset(locations)
        trans = set()
        accepting = set()
        for c in configs:
            if c.location not in locations:
                raise PdsError(f"configuration location {c.location!r} is not a location")
            state = c.location
            for k, g in enumerate(c.stack):
                nxt = State("cfg", (c.location, c.stack[: k + 1]))
                trans.add((state, g, nxt))
                state = nxt
            accepting.add(state)
        return cls(locations, frozenset(trans), frozenset(accepting))

    @classmethod
    def any_stack(cls, at: Iterable, stack_alphabet: Iterable, locations: Iterable) -> "ConfigAutomaton":
        """All configurations whose location is in ``at``, with any stack."""
        locations = frozenset(locations)
        at = frozenset(at)
        if not at <= locations:
            raise PdsError("any_stack: target locations are not all locations")
        sink = State("all", None)
        trans = set()
        for g in stack_alphabet:
            trans.add((sink, g, sink))
            for p in at:
                trans.add((p, g, sink))
        return cls(locations, frozenset(trans), frozenset(at) | {sink})

    # -- queries ----------------------------------------------------------

    @cached_property
    def _out(self) -> dict:
        out = defaultdict(list)
        for s, g, t in self.transitions:
            out[s].append((g, t))
        return out

    def _closure(self, states: Iterable) -> set:
        seen = set(states)
        stack = list(seen)
        out = self._out
        while stack:
            s = stack.pop()
            for g, t in out.get(s, ()):
                if g is EPS and t not in seen:
                    seen.add(t)
                    stack.append(t)
        return seen

    def accepts(self, config: Configuration) -> bool:
        if config.location not in self.locations:
            return False
        current = self._closure([config.location])
        out = self._out
        for sym in config.stack:
            nxt = set()
            for s in current:
                for g, t in out.get(s, ()):
                    if g == sym and g is not EPS:
                        nxt.add(t)
            if not nxt:
                return False
            current = self._closure(nxt)
        return not current.isdisjoint(self.accepting)

    @cached_property
    def _productive(self) -> frozenset:
        """States from which some accepting state is reachable."""
        back = defaultdict(list)
        for s, _, t in self.transitions:
            back[t].append(s)
        seen = set(self.accepting)
        stack = list(seen)
        while stack:
            t = stack.pop()
            for s in back.get(t, ()):
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return frozenset(seen)

    def nonempty_at(self, location) -> bool:
        return location in self.locations and location in self._productive

    def nonempty_locations(self) -> frozenset:
        return frozenset(p for p in self.locations if p in self._productive)

    def is_empty(self) -> bool:
        return not any(p in self._productive for p in self.locations)

    def restrict_locations(self, keep: Iterable) -> "ConfigAutomaton":
        """Same automaton with entries outside ``keep`` dropped."""
        keep = frozenset(keep) & self.locations
        return ConfigAutomaton(keep, self.transitions, self.accepting)

    def relabel_entries(self, mapping: dict, locations: Iterable | None = None) -> "ConfigAutomaton":
        """Rename entry states; entries not in ``mapping`` are turned into plain states."""
        def ren(s):
            if s in self.locations:
                return mapping[s] if s in mapping else State("old", s)
            return s
        trans = frozenset((ren(s), g, ren(t)) for s, g, t in self.transitions)
        acc = frozenset(ren(s) for s in self.accepting)
        locs = frozenset(mapping.values()) if locations is None else frozenset(locations)
        return ConfigAutomaton(locs, trans, acc)

    def configurations(self, max_depth: int, stack_alphabet: Iterable) -> set:
        """Enumerate accepted configurations with stacks of length at most ``max_depth``."""
        alphabet = list(stack_alphabet)
        result = set()
        for p in self.locations:
            frontier = [((), self._closure([p]))]
            for depth in range(max_depth + 1):
                nxt = []
                for stack, states in frontier:
                    if not states.isdisjoint(self.accepting):
                        result.add(Configuration(p, stack))
                    if depth == max_depth:
                        continue
                    for g in alphabet:
                        moved = {t for s in states for h, t in self._out.get(s, ()) if h == g and h is not EPS}
                        if moved:
                            nxt.append((stack + (g,), self._closure(moved)))
                frontier = nxt
        return result

    def dump(self) -> str:
        """One transition per line, ``state letter state``; deterministic order."""
        lines = []
        for s, g, t in self.transitions:
            lines.append(f"{s!r} {'eps' if g is EPS else g!r} {t!r}")
        lines.sort()
        lines.extend(f"accept {s!r}" for s in sorted(map(repr, self.accepting)))
        return "\n".join(lines)


def intersect(a: ConfigAutomaton, b: ConfigAutomaton) -> ConfigAutomaton:
    """Automaton accepting configurations accepted by both ``a`` and ``b``."""
    locations = a.locations & b.locations
    trans = set()
    seen = set()
    work = deque()
    for p in locations:
        seen.add((p, p))
        work.append((p, p))
    accepting = set()
    a_out, b_out = a._out, b._out

    def node(x, y):
        if x in locations and x == y:
            return x
        return State("x", (x, y))

    while work:
        x, y = work.popleft()
        src = node(x, y)
        if x in a.accepting and y in b.accepting:
            accepting.add(src)
        succ = []
        for g, x2 in a_out.get(x, ()):
            if g is EPS:
                succ.append((EPS, x2, y))
        for g, y2 in b_out.get(y, ()):
            if g is EPS:
                succ.append((EPS, x, y2))
        by_sym = defaultdict(list)
        for g, y2 in b_out.get(y, ()):
            if g is not EPS:
                by_sym[g].append(y2)
        for g, x2 in a_out.get(x, ()):
            if g is not EPS:
                for y2 in by_sym.get(g, ()):
                    succ.append((g, x2, y2))
        for g, x2, y2 in succ:
            trans.add((src, g, node(x2, y2)))
            if (x2, y2) not in seen:
                seen.add((x2, y2))
                work.append((x2, y2))
    return ConfigAutomaton(locations, frozenset(trans), frozenset(accepting))


def _prepare(pds: PushdownSystem, aut: ConfigAutomaton):
    """Epsilon-free copy of ``aut`` whose entry states have no incoming transitions."""
    unknown = aut.locations - pds.locations
    if unknown:
        raise PdsError(f"automaton entry states {sorted(map(repr, unknown))} are not locations of the system")

    def wrap(s):
        return State("s", s)

    states = {s for s, _, _ in aut.transitions} | {t for _, _, t in aut.transitions}
    states |= aut.locations | aut.accepting
    trans = set()
    accepting = set()
    for s in states:
        closure = aut._closure([s])
        if not closure.isdisjoint(aut.accepting):
            accepting.add(wrap(s))
            if s in aut.locations:
                accepting.add(s)
        for c in closure:
            for g, t in aut._out.get(c, ()):
                if g is EPS:
                    continue
                trans.add((wrap(s), g, wrap(t)))
                if s in aut.locations:
                    trans.add((s, g, wrap(t)))
    return trans, accepting


def post_star(pds: PushdownSystem, start: ConfigAutomaton) -> ConfigAutomaton:
    """Configurations reachable (by any word) from a configuration accepted by ``start``."""
    norm = pds.normalized
    trans, accepting = _prepare(norm, start)
    entries = start.locations
    by_head = norm._by_head

    rel = set()
    rel_from = defaultdict(set)
    eps_into = defaultdict(set)
    work = []
    for t in trans:
        if t[0] in entries:
            work.append(t)
        else:
            rel.add(t)
            rel_from[t[0]].add((t[1], t[2]))
    # states that start out as entries of the output
    all_locations = norm.locations

    while work:
        t = work.pop()
        if t in rel:
            continue
        rel.add(t)
        p, g, q = t
        if g is not EPS:
            rel_from[p].add((g, q))
            for r in by_head.get((p, g), ()):
                w = r.push
                if not w:
                    work.append((r.dst, EPS, q))
                elif len(w) == 1:
                    work.append((r.dst, w[0], q))
                else:
                    m = State("mid", (r.dst, w[0]))
                    work.append((r.dst, w[0], m))
                    tm = (m, w[1], q)
                    if tm not in rel:
                        rel.add(tm)
                        rel_from[m].add((w[1], q))
                        for p3 in eps_into[m]:
                            work.append((p3, w[1], q))
        else:
            if q not in eps_into or p not in eps_into[q]:
                eps_into[q].add(p)
            for g2, q2 in list(rel_from[q]):
                work.append((p, g2, q2))

    norm_only = all_locations - pds.locations
    out = frozenset(x for x in rel if x[0] not in norm_only)
    return ConfigAutomaton(pds.locations, out, frozenset(accepting))


def pre_star(pds: PushdownSystem, target: ConfigAutomaton) -> ConfigAutomaton:
    """Configurations from which some configuration accepted by ``target`` is reachable."""
    norm = pds.normalized
    trans, accepting = _prepare(norm, target)
    pop_rules = []
    by_swap = defaultdict(list)   # (dst, g) -> heads for push length 1
    by_push2 = defaultdict(list)  # (dst, g) -> (head, g2) for push length 2
    for r in norm.rules:
        if not r.push:
            pop_rules.append(r)
        elif len(r.push) == 1:
            by_swap[(r.dst, r.push[0])].append((r.src, r.top))
        else:
            by_push2[(r.dst, r.push[0])].append(((r.src, r.top), r.push[1]))

    work = list(trans)
    for r in pop_rules:
        work.append((r.src, r.top, r.dst))
    rel = set()
    rel_from = defaultdict(set)
    derived = defaultdict(list)  # (state, g2) -> heads of derived rules

    while work:
        t = work.pop()
        if t in rel:
            continue
        rel.add(t)
        q, g, q2 = t
        rel_from[(q, g)].add(q2)
        for head in by_swap.get((q, g), ()):
            work.append((head[0], head[1], q2))
        for head in derived.get((q, g), ()):
            work.append((head[0], head[1], q2))
        for head, g2 in by_push2.get((q, g), ()):
            derived[(q2, g2)].append(head)
            for q3 in list(rel_from.get((q2, g2), ())):
                work.append((head[0], head[1], q3))

    norm_only = norm.locations - pds.locations
    out = frozenset(x for x in rel if x[0] not in norm_only)
    return ConfigAutomaton(pds.locations, out, frozenset(accepting))


def nonempty_between(pds: PushdownSystem, initial: ConfigAutomaton, final: ConfigAutomaton) -> bool:
    """True iff some configuration of ``initial`` reaches some configuration of ``final``."""
    unknown = final.locations - pds.locations
    if unknown:
        raise PdsError("final automaton entry states are not locations of the system")
    reach = post_star(pds, initial)
    return not intersect(reach, final).is_empty()


def automaton_member(aut: ConfigAutomaton, config: Configuration) -> bool:
    return aut.accepts(config)


def reachable_locations(pds: PushdownSystem, start: ConfigAutomaton | None = None) -> frozenset:
    """Locations carrying at least one configuration reachable from ``start``."""
    if start is None:
        start = ConfigAutomaton.from_configs([pds.initial_configuration], pds.locations)
    return post_star(pds, start).nonempty_locations()


# -- finite automata over words ------------------------------------------


@dataclass(frozen=True)
class Nfa:
    states: frozenset
    alphabet: frozenset
    transitions: frozenset  # (state, letter | WILDCARD, state)
    initial: Hashable
    accepting: frozenset

    def __post_init__(self):
        for name in ("states", "alphabet", "transitions", "accepting"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.initial not in self.states:
            raise PdsError("initial state is not a state")
        for s, x, t in self.transitions:
            if s not in self.states or t not in self.states:
                raise PdsError("transition references an undeclared state")
            if x is not WILDCARD and x not in self.alphabet:
                raise PdsError(f"transition letter {x!r} outside the alphabet")
        if not self.accepting <= self.states:
            raise PdsError("accepting states must be states")

    @cached_property
    def _out(self) -> dict:
        out = defaultdict(list)
        for s, x, t in self.transitions:
            out[s].append((x, t))
        return out

    def step(self, state, letter) -> list:
        return [t for x, t in self._out.get(state, ()) if x is WILDCARD or x == letter]

    def accepts(self, word: Iterable) -> bool:
        current = {self.initial}
        for letter in word:
            current = {t for s in current for t in self.step(s, letter)}
            if not current:
                return False
        return not current.isdisjoint(self.accepting)


def word_nfa(word: Iterable) -> Nfa:
    """Automaton accepting exactly ``word``."""
    word = tuple(word)
    states = range(len(word) + 1)
    return Nfa(frozenset(states), frozenset(word),
               frozenset((k, c, k + 1) for k, c in enumerate(word)), 0, frozenset({len(word)}))


def product_with_nfa(pds: PushdownSystem, nfa: Nfa) -> PushdownSystem:
    """Pushdown system accepting the intersection of both word languages."""
    if not nfa.alphabet <= pds.alphabet:
        extra = sorted(map(str, nfa.alphabet - pds.alphabet))
        raise PdsError(f"automaton letters {extra} are outside the pushdown alphabet")
    locations = frozenset((q, s) for q in pds.locations for s in nfa.states)
    by_letter = defaultdict(list)
    wild = []
    for s, x, t in nfa.transitions:
        if x is WILDCARD:
            wild.append((s, t))
        else:
            by_letter[x].append((s, t))
    rules = []
    for r in pds.rules:
        if r.label is EPS:
            for s in nfa.states:
                rules.append(Rule((r.src, s), r.top, EPS, (r.dst, s), r.push))
        else:
            for s, t in by_letter.get(r.label, []) + wild:
                rules.append(Rule((r.src, s), r.top, r.label, (r.dst, t), r.push))
    finals = frozenset((q, s) for q in pds.final_locations for s in nfa.accepting)
    init = (pds.initial_location, nfa.initial) if pds.initial_location is not None else None
    return PushdownSystem(locations, pds.alphabet, pds.stack_alphabet, tuple(dict.fromkeys(rules)),
                          init, finals, pds.initial_stack)


def accepts_language_nonempty(pds: PushdownSystem) -> bool:
    """Some word is accepted (with arbitrary final stack)."""
    init = ConfigAutomaton.from_configs([pds.initial_configuration], pds.locations)
    fin = ConfigAutomaton.any_stack(pds.final_locations, pds.stack_alphabet, pds.locations)
    return nonempty_between(pds, init, fin)


def accepts_word(pds: PushdownSystem, word: Iterable) -> bool:
    word = tuple(word)
    if not set(word) <= pds.alphabet:
        return False
    return accepts_language_nonempty(product_with_nfa(pds, word_nfa(word)))


def accepts_with_F_sequence(pds: PushdownSystem, seq: Iterable) -> bool:
    """Is some accepted word's first-occurrence sequence exactly ``seq``?"""
    from .lru_exact import z_automaton

    seq = tuple(seq)
    return accepts_language_nonempty(product_with_nfa(pds, z_automaton(seq)))
