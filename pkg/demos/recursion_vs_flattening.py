"""A procedure called from two places: once with ``a`` cached, once after
``a`` was evicted.  Flattening the call graph invents a path through the
wrong return edge; the pushdown analysis does not."""

from pdcache import parse_program
from pdcache.age_filter import classify_fast, exist_bounds, must_may_bounds
from pdcache.lru_exact import classify_exact
from pdcache.program import flatten

PROGRAM = """
assoc 2
entry main
proc main start m0 end m9
proc P start ps end pe
edge main m0 a1 access a
edge main a1 a2 call P
edge main a2 c0 access a
edge main c0 c1 access c
edge main c1 b1 access d
edge main b1 b2 call P
edge main b2 m9 access a
edge P ps pe eps
"""


def main():
    p = parse_program(PROGRAM)
    g = flatten(p)
    mm = must_may_bounds(g, 2)
    ex = exist_bounds(g, 2)
    print("age bounds for a (l, h) / existence bounds (l', h'), K=2 means evicted")
    for v in g.vertices:
        print(f"  {v[0]}.{v[1]:3} {mm[v]['a']}  {ex.get(v, {}).get('a')}")
    print()
    fast = classify_fast(p, 2)
    exact = classify_exact(p, 2)
    print("site                  fast                    exact")
    for site in p.access_sites():
        print(f"  {site.proc}.{site.src}->{site.dst} {site.block}   {fast[site].verdict:22}  {exact[site].verdict}")
    print()
    print("The flat graph lets P return from the first call to b2, where a would still")
    print("be cached, so the bounds at b2 straddle hit and miss.  The return edge wipes")
    print("the existence bounds, so the filter abstains instead of claiming the access")
    print("may hit; the pushdown search then finds that it never does.")


if __name__ == "__main__":
    main()
