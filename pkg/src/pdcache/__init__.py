"""Cache analysis for programs with (recursive) procedure calls.

Exact LRU classification by backtracking over first-occurrence sequences on
top of pushdown reachability, cheap sound age bounds used as a filter, an
explicit-state oracle for every supported policy, and the FIFO hardness
reduction from Boolean register machines.
"""

from .age_filter import classify_fast, combined_classify, exist_bounds, must_may_bounds
from .lru_exact import (LruAnalyzer, classify_exact, exist_hit, exist_miss, first_occurrences,
                        z_automaton)
from .policy_sim import (ALWAYS_HIT, ALWAYS_MISS, UNKNOWN, UNREACHABLE, Classification,
                         explicit_oracle_classify, simulate)
from .program import Program, flatten, parse_program, render_program, slice_program, to_pushdown
from .psys import ConfigAutomaton, Configuration, PushdownSystem, Rule, post_star, pre_star

__all__ = [
    "ALWAYS_HIT", "ALWAYS_MISS", "UNKNOWN", "UNREACHABLE", "Classification", "ConfigAutomaton",
    "Configuration", "LruAnalyzer", "Program", "PushdownSystem", "Rule", "classify_exact",
    "classify_fast", "combined_classify", "exist_bounds", "exist_hit", "exist_miss",
    "explicit_oracle_classify", "first_occurrences", "flatten", "must_may_bounds", "parse_program",
    "post_star", "pre_star", "render_program", "simulate", "slice_program", "to_pushdown", "z_automaton",
]
