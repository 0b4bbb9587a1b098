"""Cheap LRU age bounds on the flattened graph and the filter pipeline.

Ages run over ``0 .. K-1`` with ``K`` standing for "not cached".  Two
fixpoints are computed per vertex and block:

* ``(l, h)``: bounds on the minimum and maximum age over all executions;
  sound for the pushdown semantics since flattening only adds paths.
* ``(l', h')``: existence bounds (some execution has age ``<= l'``, some has
  age ``>= h'``).  Flattening breaks these, so every return edge resets them
  to the vacuous ``(inf, 0)`` and vertices that are not pushdown-reachable
  are left without facts.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable

from .lru_exact import LruAnalyzer, SearchStats
from .policy_sim import ALWAYS_HIT, ALWAYS_MISS, UNKNOWN, UNREACHABLE, Classification
from .program import AccessSite, FlatGraph, Program, flatten

INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class FastVerdict:
    verdict: str  # a classification or INCONCLUSIVE
    method: str | None


def _inc(x: int, k: int) -> int:
    return min(x + 1, k)


def _fixpoint(g: FlatGraph, init: dict, transfer, join, allowed=None) -> dict:
    succ = g.successors()
    val = {g.entry: init}
    work = deque([g.entry])
    queued = {g.entry}
    while work:
        v = work.popleft()
        queued.discard(v)
        for e in succ[v]:
            if allowed is not None and e.dst not in allowed:
                continue
            out = transfer(val[v], e)
            old = val.get(e.dst)
            new = out if old is None else join(old, out)
            if new != old:
                val[e.dst] = new
                if e.dst not in queued:
                    queued.add(e.dst)
                    work.append(e.dst)
    return {v: dict(zip(g.blocks, x)) for v, x in val.items()}


def _initial(g: FlatGraph, k: int, mode: str):
    if mode == "empty":
        return tuple((k, k) for _ in g.blocks)
    if mode == "arbitrary":
        return tuple((0, k) for _ in g.blocks)
    raise ValueError(f"unknown initial mode {mode!r}")


def _join(a, b):
    return tuple((min(x[0], y[0]), max(x[1], y[1])) for x, y in zip(a, b))


def must_may_bounds(g: FlatGraph, k: int, mode: str = "empty") -> dict:
    """``vertex -> block -> (l, h)`` for every flat vertex reached."""
    idx = {b: i for i, b in enumerate(g.blocks)}

    def transfer(x, e):
        if e.kind != "access":
            return x
        i = idx[e.block]
        lb, hb = x[i]
        out = []
        for j, (l, h) in enumerate(x):
            if j == i:
                out.append((0, 0))
                continue
            nh = h if l >= hb else _inc(h, k)
            nl = _inc(l, k) if h < lb else l
            out.append((nl, nh))
        return tuple(out)

    return _fixpoint(g, _initial(g, k, mode), transfer, _join)


def exist_bounds(g: FlatGraph, k: int, mode: str = "empty", reachable: Iterable | None = None) -> dict:
    """``vertex -> block -> (l', h')``.

    ``reachable`` restricts facts to vertices known to be reachable under
    call/return matching; without it, evidence at a vertex reached only by a
    mismatched return path would be unsound.
    """
    idx = {b: i for i, b in enumerate(g.blocks)}
    reset = tuple((k, 0) for _ in g.blocks)

    def transfer(x, e):
        if e.kind == "return":
            return reset
        if e.kind != "access":
            return x
        i = idx[e.block]
        return tuple((0, 0) if j == i else (_inc(l, k), h) for j, (l, h) in enumerate(x))

    allowed = None if reachable is None else set(reachable)
    return _fixpoint(g, _initial(g, k, mode), transfer, _join, allowed)


def fast_verdict(lh, lh2, k: int) -> tuple:
    l, h = lh
    if h <= k - 1:
        return ALWAYS_HIT, "interval"
    if l >= k:
        return ALWAYS_MISS, "interval"
    if lh2 is not None and lh2[0] <= k - 1 and lh2[1] >= k:
        return UNKNOWN, "exist-bounds"
    return INCONCLUSIVE, None


def classify_fast(p: Program, k: int, mode: str = "empty", sites: Iterable[AccessSite] | None = None,
                  analyzer: LruAnalyzer | None = None) -> dict:
    """Per-site verdict from the bounds alone; ``inconclusive`` when they
    cannot settle the site."""
    an = analyzer or LruAnalyzer(p, k, mode)
    g = flatten(p)
    reach = {v for v in g.vertices if an.reachable(v)}
    mm = must_may_bounds(g, k, mode)
    ex = exist_bounds(g, k, mode, reachable=reach)
    if sites is None:
        sites = p.access_sites()
    out = {}
    for site in sites:
        v = site.vertex
        if v not in reach:
            out[site] = FastVerdict(UNREACHABLE, "reachability")
        else:
            out[site] = FastVerdict(*fast_verdict(mm[v][site.block], ex.get(v, {}).get(site.block), k))
    return out


def combined_classify(p: Program, k: int, mode: str = "empty", sites: Iterable[AccessSite] | None = None,
                      *, witnesses: bool = False, stats: SearchStats | None = None, **exact_opts) -> dict:
    """Fast bounds first, backtracking only for what they leave open."""
    stats = stats if stats is not None else SearchStats()
    an = LruAnalyzer(p, k, mode, stats=stats, **exact_opts)
    fast = classify_fast(p, k, mode, sites, analyzer=an)
    out = {}
    for site, c in fast.items():
        if c.verdict == INCONCLUSIVE:
            out[site] = an.classify_site(site, witnesses)
        else:
            stats.counts[c.method] += 1
            out[site] = Classification(c.verdict, c.method)
    return out


def method_counts(result: dict) -> Counter:
    return Counter(c.method for c in result.values())
