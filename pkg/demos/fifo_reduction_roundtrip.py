"""Turn a register machine into a FIFO cache question and check that both
sides agree, then watch the cache act as a delay line for the registers."""

from pdcache.brm_reduction import (decode_state, fifo_reduction, gadget_words, parse_brm, validate_reduction,
                                   well_formed_state, Assign, Guard)
from pdcache.policy_sim import fifo_update

MACHINE = """
registers 2
proc 1 start s end t
proc 2 start a end b
edge 1 s x call 2
edge 1 x y call 2
edge 1 y t guard 2 0
edge 2 a c guard 2 0
edge 2 c b assign 2 1
edge 2 a d guard 2 1
edge 2 d b assign 2 0
"""


def main():
    m = parse_brm(MACHINE)
    inst = fifo_reduction(m)
    print(f"machine: r={m.registers}, {m.edge_count()} edges")
    print(f"instance: K={inst.assoc}, {len(inst.program.vertices)} vertices, query {inst.query_block}")
    rep = validate_reduction(m)
    print(f"machine reaches its end: {rep.machine_reachable}; cache can hold the query block: {rep.cache_exist_hit}")

    flipped = parse_brm(MACHINE.replace("edge 1 y t guard 2 0", "edge 1 y t guard 2 1"))
    rep = validate_reduction(flipped)
    print(f"with the final guard flipped: {rep.machine_reachable} / {rep.cache_exist_hit}")
    print()

    s = well_formed_state((0, 0))
    print(f"registers (0, 0) as a cache state: {s.render()}")
    for instr in (Assign(2, 1), Guard(2, 1), Assign(1, 1)):
        outcomes = set()
        for word in gadget_words(instr, 2):
            t = s
            for b in word:
                t = fifo_update(t, b)
            outcomes.add((t, decode_state(t, 2)))
        good = [d for _, d in outcomes if d is not None]
        print(f"  {instr}: {len(outcomes)} distinct outcomes, well-formed ones decode to {good}")
        s = next(t for t, d in outcomes if d is not None)


if __name__ == "__main__":
    main()
