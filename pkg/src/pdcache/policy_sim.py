"""Concrete cache-set semantics (LRU, FIFO, PLRU, NMRU) and an exact
explicit-state classifier for programs with procedures.

States are immutable and hashable.  LRU and FIFO states list blocks
youngest first.  Blocks named ``~f1 .. ~fK`` are *fresh*: they never occur
in a program and stand for arbitrary unrelated initial cache content.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, perm
from typing import Iterable

from .program import AccessSite, Program
from .tabulation import BudgetExceeded, Tabulation

DEFAULT_BUDGET = 2_000_000

ALWAYS_HIT = "always-hit"
ALWAYS_MISS = "always-miss"
UNKNOWN = "definitely-unknown"
UNREACHABLE = "unreachable"
CLASSES = (ALWAYS_HIT, ALWAYS_MISS, UNKNOWN, UNREACHABLE)


class PolicyError(ValueError):
    pass


def fresh_block(k: int) -> str:
    return f"~f{k}"


def is_fresh(block) -> bool:
    return isinstance(block, str) and block.startswith("~f")


@dataclass(frozen=True)
class Classification:
    verdict: str
    method: str
    witness: object = None

    def __post_init__(self):
        if self.verdict not in CLASSES:
            raise ValueError(f"unknown classification {self.verdict!r}")


# -- states ----------------------------------------------------------------


@dataclass(frozen=True)
class LruState:
    blocks: tuple
    assoc: int

    def __post_init__(self):
        if self.assoc < 1:
            raise PolicyError("associativity must be positive")
        if len(self.blocks) > self.assoc or len(set(self.blocks)) != len(self.blocks):
            raise PolicyError(f"invalid LRU state {self.blocks}")

    def render(self) -> str:
        return " ".join(self.blocks)


@dataclass(frozen=True)
class FifoState:
    blocks: tuple
    assoc: int

    def __post_init__(self):
        if self.assoc < 1:
            raise PolicyError("associativity must be positive")
        if len(self.blocks) > self.assoc or len(set(self.blocks)) != len(self.blocks):
            raise PolicyError(f"invalid FIFO state {self.blocks}")

    def render(self) -> str:
        return " ".join(self.blocks)


def _check_pow2(k: int):
    if k < 1 or k & (k - 1):
        raise PolicyError(f"PLRU associativity must be a power of two, got {k}")


@dataclass(frozen=True)
class PlruState:
    """``lines[i]`` is a block or ``None``; ``tags`` are the K-1 tree bits in
    level order (root first), 0 pointing left and 1 pointing right."""

    lines: tuple
    tags: tuple

    def __post_init__(self):
        _check_pow2(len(self.lines))
        if len(self.tags) != len(self.lines) - 1 or any(t not in (0, 1) for t in self.tags):
            raise PolicyError("PLRU state needs K-1 tag bits")
        present = [b for b in self.lines if b is not None]
        if len(set(present)) != len(present):
            raise PolicyError("PLRU lines must hold distinct blocks")

    @property
    def assoc(self) -> int:
        return len(self.lines)

    @property
    def blocks(self) -> tuple:
        return tuple(b for b in self.lines if b is not None)

    def pointed_line(self) -> int:
        node = 0
        k = self.assoc
        while node < k - 1:
            node = 2 * node + 1 + self.tags[node]
        return node - (k - 1)

    def render(self) -> str:
        lines = " ".join("-" if b is None else b for b in self.lines)
        return f"[{lines}] {''.join(map(str, self.tags))}"


@dataclass(frozen=True)
class NmruState:
    entries: tuple  # ((block, bit), ...)
    assoc: int

    def __post_init__(self):
        blocks = [b for b, _ in self.entries]
        if len(blocks) > self.assoc or len(set(blocks)) != len(blocks):
            raise PolicyError(f"invalid NMRU state {self.entries}")
        if any(r not in (0, 1) for _, r in self.entries):
            raise PolicyError("MRU bits must be 0 or 1")
        if self.assoc >= 2 and len(blocks) == self.assoc and all(r for _, r in self.entries):
            raise PolicyError("full NMRU state cannot have every MRU bit set")

    @property
    def blocks(self) -> tuple:
        return tuple(b for b, _ in self.entries)

    def render(self) -> str:
        return " ".join(f"{b}^{r}" for b, r in self.entries)


# -- updates ---------------------------------------------------------------


def lru_update(s: LruState, b) -> LruState:
    rest = tuple(x for x in s.blocks if x != b)
    return LruState(((b,) + rest)[: s.assoc], s.assoc)


def fifo_update(s: FifoState, b) -> FifoState:
    if b in s.blocks:
        return s
    return FifoState(((b,) + s.blocks)[: s.assoc], s.assoc)


def _adjust_away(tags: list, line: int, k: int):
    node = k - 1 + line
    while node > 0:
        parent = (node - 1) // 2
        came_from_right = node == 2 * parent + 2
        tags[parent] = 0 if came_from_right else 1
        node = parent


def plru_update(s: PlruState, b) -> PlruState:
    k = s.assoc
    lines = list(s.lines)
    tags = list(s.tags)
    if b in lines:
        line = lines.index(b)
    elif None in lines:
        line = lines.index(None)
        lines[line] = b
    else:
        line = s.pointed_line()
        lines[line] = b
    _adjust_away(tags, line, k)
    return PlruState(tuple(lines), tuple(tags))


def nmru_update(s: NmruState, b) -> NmruState:
    entries = list(s.entries)
    blocks = [x for x, _ in entries]
    if b in blocks:
        pos = blocks.index(b)
        entries[pos] = (b, 1)
    elif len(entries) < s.assoc:
        entries.append((b, 1))
        pos = len(entries) - 1
    else:
        zeros = [i for i, (_, r) in enumerate(entries) if r == 0]
        pos = zeros[0] if zeros else 0  # no 0 bit only when K == 1
        entries[pos] = (b, 1)
    others = [r for i, (_, r) in enumerate(entries) if i != pos]
    if others and all(others):
        entries = [(x, 1 if i == pos else 0) for i, (x, _) in enumerate(entries)]
    return NmruState(tuple(entries), s.assoc)


def is_hit(s, b) -> bool:
    return b in s.blocks


# -- policies --------------------------------------------------------------


def _canonical_sequences(k: int, blocks: tuple, max_len: int):
    """Sequences of distinct elements over ``blocks`` plus fresh blocks, the
    fresh ones appearing as ~f1, ~f2, ... in positional order."""
    out = []

    def rec(prefix, used, nfresh):
        out.append(tuple(prefix))
        if len(prefix) == max_len:
            return
        for b in blocks:
            if b not in used:
                prefix.append(b)
                used.add(b)
                rec(prefix, used, nfresh)
                used.discard(b)
                prefix.pop()
        if nfresh < k:
            f = fresh_block(nfresh + 1)
            prefix.append(f)
            rec(prefix, used, nfresh + 1)
            prefix.pop()

    rec([], set(), 0)
    return out


class Policy:
    name = ""

    def empty(self, k: int):
        raise NotImplementedError

    def update(self, s, b):
        raise NotImplementedError

    def enumerate_states(self, k: int, blocks: Iterable) -> list:
        raise NotImplementedError

    def count_states(self, k: int, nblocks: int) -> int:
        """Size of ``enumerate_states`` without enumerating it."""
        raise NotImplementedError

    def check_assoc(self, k: int):
        if k < 1:
            raise PolicyError("associativity must be positive")


def _count_seq(k: int, n: int, max_len: int) -> int:
    # choose length L, j fresh positions (canonical: one labelling), rest from n blocks
    total = 0
    for length in range(max_len + 1):
        for j in range(min(length, k) + 1):
            if length - j <= n:
                total += comb(length, j) * perm(n, length - j)
    return total


class Lru(Policy):
    name = "lru"

    def empty(self, k):
        self.check_assoc(k)
        return LruState((), k)

    def update(self, s, b):
        return lru_update(s, b)

    def enumerate_states(self, k, blocks):
        self.check_assoc(k)
        return [LruState(seq, k) for seq in _canonical_sequences(k, tuple(blocks), k)]

    def count_states(self, k, nblocks):
        return _count_seq(k, nblocks, k)


class Fifo(Lru):
    name = "fifo"

    def empty(self, k):
        self.check_assoc(k)
        return FifoState((), k)

    def update(self, s, b):
        return fifo_update(s, b)

    def enumerate_states(self, k, blocks):
        self.check_assoc(k)
        return [FifoState(seq, k) for seq in _canonical_sequences(k, tuple(blocks), k)]


class Plru(Policy):
    name = "plru"

    def check_assoc(self, k):
        _check_pow2(k)

    def empty(self, k):
        _check_pow2(k)
        return PlruState((None,) * k, (0,) * (k - 1))

    def update(self, s, b):
        return plru_update(s, b)

    def enumerate_states(self, k, blocks):
        _check_pow2(k)
        blocks = tuple(blocks)
        fillings = []

        def rec(prefix, used, nfresh):
            if len(prefix) == k:
                fillings.append(tuple(prefix))
                return
            for x in (None,) + blocks:
                if x is not None and x in used:
                    continue
                prefix.append(x)
                if x is not None:
                    used.add(x)
                rec(prefix, used, nfresh)
                if x is not None:
                    used.discard(x)
                prefix.pop()
            prefix.append(fresh_block(nfresh + 1))
            rec(prefix, used, nfresh + 1)
            prefix.pop()

        rec([], set(), 0)
        tag_vectors = [tuple((m >> i) & 1 for i in range(k - 1)) for m in range(2 ** (k - 1))]
        return [PlruState(f, t) for f in fillings for t in tag_vectors]

    def count_states(self, k, nblocks):
        # each line: empty, a program block or the next fresh block
        total = 0
        for filled in range(k + 1):
            for j in range(filled + 1):
                if filled - j <= nblocks:
                    total += comb(k, filled) * comb(filled, j) * perm(nblocks, filled - j)
        return total * 2 ** (k - 1)


class Nmru(Policy):
    name = "nmru"

    def empty(self, k):
        self.check_assoc(k)
        return NmruState((), k)

    def update(self, s, b):
        return nmru_update(s, b)

    def enumerate_states(self, k, blocks):
        self.check_assoc(k)
        out = []
        for seq in _canonical_sequences(k, tuple(blocks), k):
            n = len(seq)
            for m in range(2 ** n):
                bits = tuple((m >> i) & 1 for i in range(n))
                if k >= 2 and n == k and all(bits):
                    continue
                out.append(NmruState(tuple(zip(seq, bits)), k))
        return out

    def count_states(self, k, nblocks):
        total = 0
        for length in range(k + 1):
            bits = 2 ** length - (1 if (k >= 2 and length == k) else 0)
            for j in range(min(length, k) + 1):
                if length - j <= nblocks:
                    total += comb(length, j) * perm(nblocks, length - j) * bits
        return total


POLICIES = {p.name: p for p in (Lru(), Fifo(), Plru(), Nmru())}


def get_policy(name: str) -> Policy:
    try:
        return POLICIES[name]
    except KeyError:
        raise PolicyError(f"unknown policy {name!r}") from None


def enumerate_initial_states(policy: str, k: int, blocks: Iterable, mode: str = "arbitrary") -> list:
    pol = get_policy(policy)
    if mode == "empty":
        return [pol.empty(k)]
    if mode != "arbitrary":
        raise PolicyError(f"unknown initial mode {mode!r}")
    return pol.enumerate_states(k, tuple(blocks))


def simulate(policy: str, k: int, trace: Iterable, initial=None) -> list:
    pol = get_policy(policy)
    s = pol.empty(k) if initial is None else initial
    out = []
    for b in trace:
        s = pol.update(s, b)
        out.append(s)
    return out


# -- exact oracle ------------------------------------------------------------


def oracle_size_estimate(p: Program, policy: str, k: int, mode: str) -> int:
    """Worst-case number of product locations (vertex, cache state)."""
    pol = get_policy(policy)
    return len(p.vertices) * pol.count_states(k, len(p.blocks))


def reachable_cache_states(p: Program, policy: str, k: int, mode: str = "empty",
                           budget: int = DEFAULT_BUDGET, track: bool = False) -> Tabulation:
    """Tabulate reachable ``(vertex, cache state)`` pairs under exact call/return matching.

    Raises :class:`BudgetExceeded` once more than ``budget`` path edges have
    been materialised.
    """
    pol = get_policy(policy)
    pol.check_assoc(k)
    initial = enumerate_initial_states(policy, k, p.blocks, mode)
    step = lambda s, b: (pol.update(s, b),)
    return Tabulation(p, initial, step, budget=budget, track=track)


def classify_from_states(states: set, block) -> str:
    if not states:
        return UNREACHABLE
    hits = [is_hit(s, block) for s in states]
    if all(hits):
        return ALWAYS_HIT
    if not any(hits):
        return ALWAYS_MISS
    return UNKNOWN


def explicit_oracle_classify(p: Program, policy: str, k: int, mode: str = "empty",
                             sites: Iterable[AccessSite] | None = None,
                             budget: int = DEFAULT_BUDGET) -> dict:
    tab = reachable_cache_states(p, policy, k, mode, budget)
    if sites is None:
        sites = p.access_sites()
    return {site: Classification(classify_from_states(tab.reach.get(site.vertex, set()), site.block), "oracle")
            for site in sites}


def oracle_exist_hit(p: Program, vertex, block, policy: str, k: int, mode: str = "empty",
                     budget: int = DEFAULT_BUDGET) -> bool:
    tab = reachable_cache_states(p, policy, k, mode, budget)
    vertex = p.resolve_vertex(vertex)
    return any(is_hit(s, block) for s in tab.reach.get(vertex, ()))


# -- product pushdown route --------------------------------------------------


def cache_pushdown(p: Program, policy: str, k: int, mode: str = "empty",
                   budget: int = DEFAULT_BUDGET):
    """The program's pushdown system with cache states folded into control
    locations ``((proc, vertex), state)``.

    Only cache states reachable from the initial ones by some block sequence
    are materialised; the worst-case size is checked against ``budget`` first.
    """
    from .program import to_pushdown
    from .psys import EPS, PushdownSystem, Rule

    estimate = oracle_size_estimate(p, policy, k, mode)
    if estimate > budget:
        raise BudgetExceeded(estimate, budget)
    pol = get_policy(policy)
    initial = enumerate_initial_states(policy, k, p.blocks, mode)
    states = set(initial)
    work = list(initial)
    while work:
        s = work.pop()
        for b in p.blocks:
            t = pol.update(s, b)
            if t not in states:
                states.add(t)
                work.append(t)
    base = to_pushdown(p)
    locations = frozenset((q, s) for q in base.locations for s in states)
    rules = []
    for r in base.rules:
        for s in states:
            t = s if r.label is EPS else pol.update(s, r.label)
            rules.append(Rule((r.src, s), r.top, r.label, (r.dst, t), r.push))
    pds = PushdownSystem(locations, base.alphabet, base.stack_alphabet, tuple(rules),
                         None, frozenset(), base.initial_stack)
    return pds, initial


def explicit_oracle_classify_pushdown(p: Program, policy: str, k: int, mode: str = "empty",
                                      sites: Iterable[AccessSite] | None = None,
                                      budget: int = DEFAULT_BUDGET) -> dict:
    """Same contract as :func:`explicit_oracle_classify`, computed by post* on
    the cache-expanded pushdown system."""
    from .psys import ConfigAutomaton, Configuration, post_star

    pds, initial = cache_pushdown(p, policy, k, mode, budget)
    start = ConfigAutomaton.from_configs(
        [Configuration((p.entry_vertex, s), pds.initial_stack) for s in initial], pds.locations)
    live = post_star(pds, start).nonempty_locations()
    by_vertex: dict = {}
    for q, s in live:
        by_vertex.setdefault(q, set()).add(s)
    if sites is None:
        sites = p.access_sites()
    return {site: Classification(classify_from_states(by_vertex.get(site.vertex, set()), site.block), "oracle")
            for site in sites}
