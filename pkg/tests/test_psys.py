import pytest
from hypothesis import given, settings, strategies as st

from pdcache.psys import (EPS, WILDCARD, ConfigAutomaton, Configuration, Nfa, PdsError, PushdownSystem, Rule,
                          accepts_with_F_sequence, accepts_word, automaton_member, intersect, nonempty_between,
                          post_star, pre_star, product_with_nfa, reachable_locations, word_nfa)
from pdcache.program import parse_program, to_pushdown

G = "g"


@pytest.fixture
def ex1():
    return PushdownSystem(frozenset("pq"), frozenset("ab"), frozenset([G]),
                          (Rule("p", G, "a", "p", (G, G)), Rule("p", G, "b", "q", ())), "p")


def cfg(q, n):
    return Configuration(q, (G,) * n)


def test_post_star_example(ex1):
    reach = post_star(ex1, ConfigAutomaton.from_configs([cfg("p", 1)], ex1.locations))
    for n in range(6):
        assert reach.accepts(cfg("p", n)) == (n >= 1)
        assert reach.accepts(cfg("q", n))


def test_post_star_without_rules():
    pds = PushdownSystem(frozenset("p"), frozenset(), frozenset([G]), ())
    reach = post_star(pds, ConfigAutomaton.from_configs([cfg("p", 1)], pds.locations))
    assert reach.configurations(4, [G]) == {cfg("p", 1)}


def test_pre_star_example(ex1):
    pre = pre_star(ex1, ConfigAutomaton.from_configs([cfg("q", 0)], ex1.locations))
    assert pre.configurations(5, [G]) == {cfg("p", 1), cfg("q", 0)}
    assert pre_star(ex1, ConfigAutomaton.empty(ex1.locations)).is_empty()
    at_p = pre_star(ex1, ConfigAutomaton.any_stack({"p"}, [G], ex1.locations))
    assert at_p.accepts(cfg("p", 2))


def test_long_push_is_normalized():
    pds = PushdownSystem(frozenset("pq"), frozenset("a"), frozenset("gh"),
                         (Rule("p", "g", "a", "q", ("h", "g", "h", "g")),), "p")
    post = post_star(pds, ConfigAutomaton.from_configs([Configuration("p", ("g",))], pds.locations))
    assert post.configurations(5, "gh") == {Configuration("p", ("g",)), Configuration("q", tuple("hghg"))}
    pre = pre_star(pds, ConfigAutomaton.from_configs([Configuration("q", tuple("hghg"))], pds.locations))
    assert pre.configurations(5, "gh") == {Configuration("p", ("g",)), Configuration("q", tuple("hghg"))}
    assert all(len(r.push) <= 2 for r in pds.normalized.rules)
    assert post.locations == pds.locations


def test_nonempty_between(ex1):
    one = ConfigAutomaton.from_configs([cfg("p", 1)], ex1.locations)
    assert nonempty_between(ex1, one, one)
    assert nonempty_between(ex1, one, ConfigAutomaton.from_configs([cfg("q", 3)], ex1.locations))
    q0 = ConfigAutomaton.from_configs([cfg("q", 0)], ex1.locations)
    assert not nonempty_between(ex1, q0, one)


def test_rule_validation():
    with pytest.raises(PdsError):
        PushdownSystem(frozenset("p"), frozenset(), frozenset([G]), (Rule("p", G, EPS, "z", ()),))
    with pytest.raises(PdsError):
        PushdownSystem(frozenset("p"), frozenset(), frozenset([G]), (Rule("p", "h", EPS, "p", ()),))


def test_automaton_member_and_intersect(ex1):
    a = ConfigAutomaton.from_configs([cfg("p", 1), cfg("p", 2)], ex1.locations)
    b = ConfigAutomaton.from_configs([cfg("p", 2), cfg("q", 0)], ex1.locations)
    both = intersect(a, b)
    assert automaton_member(both, cfg("p", 2))
    assert not automaton_member(both, cfg("p", 1))
    assert both.nonempty_locations() == {"p"}


@pytest.fixture
def recursive(data):
    return to_pushdown(parse_program((data / "recursive.prog").read_text()))


def test_recursive_nested_call_reaches_b4(recursive):
    reach = post_star(recursive, ConfigAutomaton.from_configs([recursive.initial_configuration], recursive.locations))
    deep = [c for c in reach.configurations(4, recursive.stack_alphabet) if c.location == ("B", "B4")]
    assert max(len(c.stack) for c in deep) >= 3  # two return symbols above the bottom
    assert reachable_locations(recursive) == recursive.locations


def test_product_with_nfa(recursive):
    wild = Nfa(frozenset([0]), frozenset(), frozenset([(0, WILDCARD, 0)]), 0, frozenset([0]))
    prod = product_with_nfa(recursive, wild)
    for w in ("abde", "accdabe", "abd"):
        assert accepts_word(prod, w) == accepts_word(recursive, w)
    starts_e = Nfa(frozenset([0, 1]), frozenset("e"), frozenset([(0, "e", 1), (1, WILDCARD, 1)]), 0, frozenset([1]))
    from pdcache.psys import accepts_language_nonempty
    assert not accepts_language_nonempty(product_with_nfa(recursive, starts_e))
    assert accepts_language_nonempty(product_with_nfa(recursive, word_nfa("abde")))
    with pytest.raises(PdsError):
        product_with_nfa(recursive, word_nfa("xyz"))


def test_accepts_with_first_occurrences(recursive):
    assert accepts_with_F_sequence(recursive, "abde")
    assert accepts_with_F_sequence(recursive, "acdbe")
    assert not accepts_with_F_sequence(recursive, "eabd")
    assert not accepts_with_F_sequence(recursive, "ab")


def test_word_acceptance(recursive):
    for w in ("abde", "accdabe", "accecdabbe"):
        assert accepts_word(recursive, w)
    for w in ("abd", "ace", "abdee", "", "abdx"):
        assert not accepts_word(recursive, w)


word = st.lists(st.sampled_from("ab"), max_size=6)


@settings(max_examples=60, deadline=None)
@given(word)
def test_word_nfa_accepts_only_its_word(w):
    n = word_nfa(w)
    assert n.accepts(w)
    assert not n.accepts(w + ["a"])
