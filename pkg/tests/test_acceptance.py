"""Acceptance criteria 1-8, one pass/fail line each."""

import itertools
import random
import time

from acceptance_log import record
from gen import chain_brms, random_brm, random_pds, random_program

from pdcache.age_filter import INCONCLUSIVE, classify_fast, combined_classify
from pdcache.brm_reduction import (Assign, Guard, TransitionRelation, brm_reachable, conj, const, decode_state,
                                   disj, eliminate_locals, encode_transition, epilogue_words, fifo_update,
                                   gadget_words, neg, run_gadget, validate_reduction, var, well_formed_state)
from pdcache.lru_exact import SearchStats, classify_exact, first_occurrences, z_automaton
from pdcache.policy_sim import FifoState, LruState, explicit_oracle_classify, fifo_update as fifo_step, lru_update
from pdcache.program import doubling_program, parse_program, slice_program, to_pushdown
from pdcache.psys import ConfigAutomaton, Configuration, accepts_word, post_star, pre_star

MODES = ("empty", "arbitrary")


def test_1_oracle_equivalence():
    rng = random.Random(20261015)
    t0 = time.time()
    sites = mismatches = 0
    for _ in range(500):
        p = random_program(rng)
        for k in (1, 2, 3, 4):
            for mode in MODES:
                oracle = explicit_oracle_classify(p, "lru", k, mode)
                exact = classify_exact(p, k, mode)
                combined = combined_classify(p, k, mode)
                for s, c in oracle.items():
                    sites += 1
                    if not (c.verdict == exact[s].verdict == combined[s].verdict):
                        mismatches += 1
    elapsed = time.time() - t0
    ok = mismatches == 0 and elapsed < 300
    record(1, ok, f"500 programs, {sites} site classifications, {mismatches} mismatches, {elapsed:.1f}s (< 300s)")
    assert ok


def _has_call(m):
    return any(type(e.instr).__name__ == "Call" for p in m.procedures.values() for e in p.edges)


def test_2_reduction_validation():
    t0 = time.time()
    machines = list(chain_brms(1, 4)) + list(chain_brms(2, 4))
    n_family = len(machines)
    rng = random.Random(7)
    randoms = []
    while len(randoms) < 120:
        m = random_brm(rng, max_registers=3)
        if _has_call(m):
            randoms.append(m)
    machines += randoms
    mismatches = positives = 0
    for m in machines:
        rep = validate_reduction(m)
        positives += rep.machine_reachable
        mismatches += not rep.match
    elapsed = time.time() - t0
    ok = mismatches == 0 and elapsed < 600
    record(2, ok, f"{n_family} exhaustive + {len(randoms)} random machines ({positives} reachable), "
                  f"{mismatches} mismatches, {elapsed:.1f}s (< 600s)")
    assert ok


def test_3_worked_values(data):
    checks = {}
    checks["F(dadaaabbaaabcbbaa)=dabc"] = "".join(first_occurrences("dadaaabbaaabcbbaa")) == "dabc"
    abcd = tuple("abcd")
    checks["LRU abcd+b=bacd"] = lru_update(LruState(abcd, 4), "b").blocks == tuple("bacd")
    checks["LRU abcd+e=eabc"] = lru_update(LruState(abcd, 4), "e").blocks == tuple("eabc")
    checks["FIFO abcd+b=abcd"] = fifo_step(FifoState(abcd, 4), "b").blocks == abcd
    checks["FIFO abcd+e=eabc"] = fifo_step(FifoState(abcd, 4), "e").blocks == tuple("eabc")
    recursive = to_pushdown(parse_program((data / "recursive.prog").read_text()))
    for w in ("abde", "accdabe", "accecdabbe"):
        checks[f"recursive example accepts {w}"] = accepts_word(recursive, w)
    sets = parse_program((data / "sets.prog").read_text())
    sets_sliced = parse_program((data / "sets_sliced.prog").read_text())
    checks["sets example slice"] = slice_program(sets, {"a", "e"}).procedures == sets_sliced.procedures
    for n in (1, 2, 3):
        pds = to_pushdown(doubling_program(n))
        accepted = [k for k in range(2 ** n + 1) if accepts_word(pds, "a" * k)]
        checks[f"doubling n={n}"] = accepted == [2 ** n]
    failed = [k for k, v in checks.items() if not v]
    record(3, not failed, f"{len(checks) - len(failed)}/{len(checks)} worked values" +
           (f"; failed: {failed}" if failed else ""))
    assert not failed


def _configs(pds, depth):
    gamma = sorted(pds.stack_alphabet)
    for n in range(depth + 1):
        for st in itertools.product(gamma, repeat=n):
            for q in sorted(pds.locations):
                yield Configuration(q, st)


def _bounded_edges(pds, cap):
    succ = {}
    for c in _configs(pds, cap):
        succ[c] = [d for _, d in pds.successors(c) if len(d.stack) <= cap]
    return succ


def _closure(succ, seeds):
    seen = set(seeds)
    stack = list(seen)
    while stack:
        c = stack.pop()
        for d in succ.get(c, ()):
            if d not in seen:
                seen.add(d)
                stack.append(d)
    return seen


def _reverse(succ):
    pred = {c: [] for c in succ}
    for c, ds in succ.items():
        for d in ds:
            pred[d].append(c)
    return pred


def _bfs_agrees(pds, claim, seeds_of, depth=5, caps=(5, 7, 9, 12)):
    """``claim`` (a set of depth<=depth configurations) must contain every
    BFS-found configuration, and equal the BFS answer for some cap."""
    small = set(_configs(pds, depth))
    for cap in caps:
        found = seeds_of(_bounded_edges(pds, cap)) & small
        if not found <= claim:
            return False, cap
        if found == claim:
            return True, cap
    return False, caps[-1]


def test_4_saturation_vs_bfs():
    rng = random.Random(11)
    t0 = time.time()
    bad = deepened = 0
    for _ in range(200):
        pds = random_pds(rng)
        locs = sorted(pds.locations)
        gamma = sorted(pds.stack_alphabet)
        starts = [Configuration(rng.choice(locs), tuple(rng.choice(gamma) for _ in range(rng.randint(0, 2))))
                  for _ in range(2)]
        post = post_star(pds, ConfigAutomaton.from_configs(starts, pds.locations))
        small = list(_configs(pds, 5))
        claim = {c for c in small if post.accepts(c)}
        ok_post, cap1 = _bfs_agrees(pds, claim, lambda g: _closure(g, [s for s in starts if s in g]))
        targets = [Configuration(rng.choice(locs), tuple(rng.choice(gamma) for _ in range(rng.randint(0, 2))))]
        anywhere = rng.choice(locs)
        target = ConfigAutomaton.from_configs(targets, pds.locations)
        target_any = ConfigAutomaton.any_stack({anywhere}, pds.stack_alphabet, pds.locations)
        pre = pre_star(pds, target)
        pre_any = pre_star(pds, target_any)
        claim_pre = {c for c in small if pre.accepts(c)}
        claim_any = {c for c in small if pre_any.accepts(c)}
        ok_pre, cap2 = _bfs_agrees(pds, claim_pre,
                                   lambda g: _closure(_reverse(g), [t for t in targets if t in g]))
        ok_any, cap3 = _bfs_agrees(pds, claim_any,
                                   lambda g: _closure(_reverse(g), [c for c in g if c.location == anywhere]))
        bad += not (ok_post and ok_pre and ok_any)
        deepened += max(cap1, cap2, cap3) > 5
    elapsed = time.time() - t0
    ok = bad == 0 and elapsed < 120
    record(4, ok, f"200 systems, post*/pre*/pre*(any stack) vs bounded BFS: {bad} mismatches "
                  f"({deepened} needed a cap above 5 to see every depth<=5 configuration), {elapsed:.1f}s (< 120s)")
    assert ok


def test_5_z_language_law():
    letters = "abc"
    seqs = [s for n in range(4) for s in itertools.permutations(letters, n)]
    words = [w for n in range(7) for w in itertools.product(letters, repeat=n)]
    bad = checked = 0
    for s in seqs:
        z = z_automaton(s)
        for w in words:
            checked += 1
            bad += z.accepts(w) != (first_occurrences(w) == s)
    record(5, bad == 0, f"{len(seqs)} sequences x {len(words)} words = {checked} checks, {bad} mismatches")
    assert bad == 0


def test_6_filter_soundness_and_economy(data):
    rng = random.Random(606)
    contradictions = decided = 0
    for _ in range(200):
        p = random_program(rng)
        for k in (1, 2, 3, 4):
            for mode in MODES:
                fast = classify_fast(p, k, mode)
                exact = classify_exact(p, k, mode)
                for s, c in fast.items():
                    if c.verdict != INCONCLUSIVE:
                        decided += 1
                        contradictions += c.verdict != exact[s].verdict
    straight = parse_program((data / "straight.prog").read_text())
    stats = SearchStats()
    res = combined_classify(straight, straight.assoc, "empty", stats=stats)
    all_fast = all(c.method in ("interval", "exist-bounds") for c in res.values())
    ok = contradictions == 0 and all_fast and stats["searches"] == 0 and stats["exact_sites"] == 0
    record(6, ok, f"{decided} fast verdicts, {contradictions} contradict exact; straight-line fixture: "
                  f"{len(res)} sites all fast={all_fast}, backtracking invocations={stats['searches']}")
    assert ok


def test_7_pruning_and_incremental_neutral():
    rng = random.Random(77)
    differing = sites = 0
    for _ in range(150):
        p = random_program(rng)
        for k in (1, 2, 3, 4):
            for mode in MODES:
                runs = [classify_exact(p, k, mode, prune=pr, incremental=inc)
                        for pr in (True, False) for inc in (True, False)]
                for s in runs[0]:
                    sites += 1
                    differing += len({r[s].verdict for r in runs}) != 1
    record(7, differing == 0, f"150 programs x K 1..4 x 2 modes, {sites} sites under 4 flag settings, "
                              f"{differing} disagreements")
    assert differing == 0


RELATION_POOL = [
    TransitionRelation(1, updates=((1, var(1)),)),
    TransitionRelation(1, updates=((1, const(1)),)),
    TransitionRelation(1, updates=((1, neg(var(1))),)),
    TransitionRelation(1, guard=const(0)),
    TransitionRelation(1, guard=var(1), updates=((1, const(0)),)),
    TransitionRelation(2, updates=((1, var(1)), (2, conj(var(1), neg(var(2)))))),
    TransitionRelation(2, updates=((1, var(2)), (2, var(1)))),
    TransitionRelation(2, guard=disj(var(1), var(2)), updates=((1, conj(var(1), var(2))),)),
    TransitionRelation(2, updates=((1, disj(conj(var(1), neg(var(2))), conj(neg(var(1)), var(2)))),)),
    TransitionRelation(2, guard=neg(conj(var(1), var(2))), updates=((2, const(1)), (1, var(2)))),
    TransitionRelation(3, updates=((3, disj(disj(conj(var(1), var(2)), conj(var(1), var(3))), conj(var(2), var(3)))),)),
    TransitionRelation(3, updates=((1, var(2)), (2, var(3)), (3, var(1)))),
    TransitionRelation(3, guard=conj(var(1), neg(var(3))), updates=((3, disj(var(2), const(1))), (2, neg(var(2))))),
    TransitionRelation(3, guard=disj(const(0), var(2)), updates=((1, neg(neg(var(1)))),)),
]


def _transport_and_trap(r):
    instrs = [k(i, b) for k in (Guard, Assign) for i in range(1, r + 1) for b in (0, 1)]
    words = {ins: gadget_words(ins, r) for ins in instrs}

    def run(state, word):
        for x in word:
            state = fifo_update(state, x)
        return state

    start = well_formed_state((0,) * r)
    seen = {start}
    todo = [start]
    transport_bad = trap_bad = epilogue_bad = 0
    while todo:
        s = todo.pop()
        regs = decode_state(s, r)
        for ins in instrs:
            if regs is not None:
                valid = not isinstance(ins, Guard) or regs[ins.reg - 1] == ins.val
                after = regs if isinstance(ins, Guard) else regs[:ins.reg - 1] + (ins.val,) + regs[ins.reg:]
            for w in words[ins]:
                t = run(s, w)
                got = decode_state(t, r)
                if regs is None:
                    trap_bad += got is not None
                elif got is not None and not (valid and got == after):
                    transport_bad += 1
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
            if regs is not None and valid:
                correct = sum((w for w in words[ins] if decode_state(run(s, w), r) == after), ())
                transport_bad += not correct
    part1, part2 = epilogue_words(r)
    for s in seen:
        end = run(s, part1 + part2)
        epilogue_bad += (f"a{r}_0" in end.blocks) != (decode_state(s, r) is not None)
    return len(seen), transport_bad, trap_bad, epilogue_bad


def test_8_gadget_invariants():
    bad_enc = 0
    for t in RELATION_POOL:
        g = encode_transition(t)
        fresh = g.registers - t.registers
        for regs in itertools.product((0, 1), repeat=t.registers):
            for junk in ((0,) * fresh, (1,) * fresh):
                image = {x[:t.registers] for x in run_gadget(g, regs + junk)}
                bad_enc += image != t.image(regs)
    rng = random.Random(88)
    bad_locals = 0
    n_local = 0
    while n_local < 120:
        m = random_brm(rng, max_registers=3, with_locals=True)
        if not m.has_locals:
            continue
        n_local += 1
        flat = eliminate_locals(m)
        for top in (False, True):
            bad_locals += brm_reachable(m, empty_stack=top) != brm_reachable(flat, empty_stack=top)
    sizes = []
    bad_wf = 0
    for r in (2, 3):
        n, a, b, c = _transport_and_trap(r)
        sizes.append(f"r={r}: {n} boundary states")
        bad_wf += a + b + c
    ok = bad_enc == 0 and bad_locals == 0 and bad_wf == 0
    record(8, ok, f"encode_transition {len(RELATION_POOL)} relations: {bad_enc} bad; eliminate_locals "
                  f"{n_local} machines: {bad_locals} bad; transport/trap/epilogue ({', '.join(sizes)}): {bad_wf} bad")
    assert ok
