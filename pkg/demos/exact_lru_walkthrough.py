"""Classify every access of a small recursive program under LRU and show
why each definitely-unknown site is genuinely both a hit and a miss."""

from pdcache import parse_program
from pdcache.age_filter import combined_classify, method_counts
from pdcache.lru_exact import SearchStats, replay_witness

PROGRAM = """
assoc 4
entry A
proc A start A0 end A5
proc B start B0 end B5
edge A A0 A1 access a
edge A A1 A2 access b
edge A A1 A3 access c
edge A A2 A4 access d
edge A A3 A4 call B
edge A A4 A5 access e
edge B B0 B1 access c
edge B B1 B2 access d
edge B B1 B3 access e
edge B B2 B4 access a
edge B B3 B4 call B
edge B B4 B5 access b
"""


def main():
    p = parse_program(PROGRAM)
    for k in (1, 2, 4):
        stats = SearchStats()
        result = combined_classify(p, k, witnesses=True, stats=stats)
        print(f"K={k}: {dict(method_counts(result))}, backtracking searches: {stats['searches']}")
        for site, c in sorted(result.items(), key=lambda kv: (kv[0].proc, kv[0].src, kv[0].dst)):
            print(f"  {site.proc}.{site.src}->{site.dst} {site.block}: {c.verdict} ({c.method})")
            if c.verdict == "definitely-unknown" and c.witness is None:
                print("      settled by existence bounds, no search needed")
            elif c.verdict == "definitely-unknown":
                for kind in ("hit", "miss"):
                    w = c.witness[kind]
                    cache = replay_witness(w, k).render() or "(empty)"
                    print(f"      {kind:4} via {' '.join(w['word']) or '(no accesses)'} -> cache {cache}")
        print()


if __name__ == "__main__":
    main()
