"""Command-line front end.

Exit codes: 0 success, 1 reduction mismatch under ``--validate``, 2 bad
input, 3 state space over budget.
"""

from __future__ import annotations

import argparse
import json
import sys

from .age_filter import INCONCLUSIVE, classify_fast, combined_classify
from .brm_reduction import BrmError, eliminate_locals, fifo_reduction, parse_brm, validate_reduction
from .lru_exact import classify_exact
from .policy_sim import (DEFAULT_BUDGET, POLICIES, FifoState, LruState, PolicyError,
                         explicit_oracle_classify, get_policy, simulate)
from .program import ProgramError, parse_program, slice_program
from .tabulation import BudgetExceeded

COLUMNS = ("proc", "src", "dst", "block", "class", "method", "witness")
ENGINES = ("auto", "fast-only", "exact-only", "oracle")


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc


def _render_run(w: dict) -> str:
    seq = " ".join(w["sequence"]) if w.get("sequence") is not None else "-"
    init = " ".join(w["initial_cache"]) or "-"
    return f"s=[{seq}] init=[{init}] run=[{' '.join(w['vertices'])}]"


def render_witness(c) -> str:
    w = c.witness
    if not w:
        return ""
    if "vertices" not in (w.get("hit") or {}):
        return "; ".join(f"{k} s=[{' '.join(v['sequence']) if v['sequence'] is not None else '-'}]"
                         for k, v in w.items())
    return f"hit {_render_run(w['hit'])}; miss {_render_run(w['miss'])}"


def analyze(text: str, policy: str = "lru", assoc: int | None = None, initial: str = "empty",
            engine: str = "auto", slice_blocks=None, budget: int = DEFAULT_BUDGET,
            witnesses: bool = True) -> list:
    """Report rows as dicts keyed by :data:`COLUMNS`."""
    p = parse_program(text)
    k = assoc if assoc is not None else p.assoc
    if k is None:
        raise InputError("no associativity: pass --assoc or put 'assoc K' in the program")
    get_policy(policy).check_assoc(k)
    if slice_blocks is not None:
        p = slice_program(p, slice_blocks)
    if engine == "auto":
        engine = "combined" if policy == "lru" else "oracle"
    if engine != "oracle" and policy != "lru":
        raise InputError(f"engine {engine} supports only the lru policy")
    if engine == "oracle":
        result = explicit_oracle_classify(p, policy, k, initial, budget=budget)
    elif engine == "combined":
        result = combined_classify(p, k, initial, witnesses=witnesses)
    elif engine == "exact-only":
        result = classify_exact(p, k, initial, witnesses=witnesses)
    else:
        result = classify_fast(p, k, initial)
    rows = []
    for site, c in result.items():
        rows.append({
            "proc": site.proc, "src": site.src, "dst": site.dst, "block": site.block,
            "class": c.verdict, "method": c.method or "-",
            "witness": render_witness(c) if c.verdict != INCONCLUSIVE and getattr(c, "witness", None) else "",
        })
    rows.sort(key=lambda r: (r["proc"], r["src"], r["dst"], r["block"]))
    return rows


def format_rows(rows: list, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    lines = ["\t".join(COLUMNS)]
    lines += ["\t".join(r[c] for c in COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"


def _blocks_arg(text: str) -> list:
    blocks = [b.strip() for b in text.split(",") if b.strip()]
    if not blocks:
        raise argparse.ArgumentTypeError("expected a comma-separated block list")
    return blocks


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdcache", description="Cache analysis for programs with procedure calls.")
    sub = ap.add_subparsers(dest="command", required=True)

    def analysis_args(sp, with_engine: bool):
        sp.add_argument("program", help="program file")
        sp.add_argument("--policy", choices=sorted(POLICIES), default="lru")
        sp.add_argument("--assoc", "-k", type=int, help="associativity (overrides the file)")
        sp.add_argument("--initial", choices=("empty", "arbitrary"), default="empty")
        if with_engine:
            sp.add_argument("--engine", choices=ENGINES, default="auto")
        sp.add_argument("--slice", type=_blocks_arg, metavar="B1,B2", help="keep only these blocks")
        sp.add_argument("--format", choices=("tsv", "json"), default="tsv")
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="oracle state budget")
        sp.add_argument("--no-witness", action="store_true", help="skip witness runs for exact verdicts")

    analysis_args(sub.add_parser("analyze", help="classify every access site"), True)
    analysis_args(sub.add_parser("oracle", help="classify with the explicit-state oracle"), False)

    sim = sub.add_parser("simulate", help="print the cache state after each access")
    sim.add_argument("--policy", choices=sorted(POLICIES), default="lru")
    sim.add_argument("--assoc", "-k", type=int, required=True)
    sim.add_argument("--from", dest="start", metavar="BLOCKS",
                     help="initial lru/fifo contents, youngest first, space separated")
    sim.add_argument("--trace", dest="trace_text", metavar="BLOCKS", help="space-separated accesses")
    sim.add_argument("trace", nargs="*", help="accessed blocks (appended after --trace)")

    red = sub.add_parser("reduce-brm", help="emit the FIFO instance of a register machine")
    red.add_argument("machine", help="machine file")
    red.add_argument("-o", "--output", help="write the instance here instead of stdout")
    red.add_argument("--validate", action="store_true", help="cross-check against the FIFO oracle")
    red.add_argument("--no-pad", action="store_true", help="keep single-register machines unpadded")
    red.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    return ap


def _cmd_analyze(args, engine) -> int:
    rows = analyze(_read(args.program), args.policy, args.assoc, args.initial, engine,
                   args.slice, args.budget, not args.no_witness)
    sys.stdout.write(format_rows(rows, args.format))
    return 0


def _cmd_simulate(args) -> int:
    pol = get_policy(args.policy)
    pol.check_assoc(args.assoc)
    start = None
    if args.start is not None:
        if args.policy not in ("lru", "fifo"):
            raise InputError("--from is supported for lru and fifo only")
        cls = LruState if args.policy == "lru" else FifoState
        start = cls(tuple(args.start.split()), args.assoc)
    trace = (args.trace_text or "").split() + args.trace
    for s in simulate(args.policy, args.assoc, trace, start):
        print(s.render())
    return 0


def _cmd_reduce(args) -> int:
    m = parse_brm(_read(args.machine))
    inst = fifo_reduction(eliminate_locals(m) if m.has_locals else m, not args.no_pad)
    text = inst.render()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not args.validate:
        return 0
    rep = validate_reduction(m, args.budget, not args.no_pad)
    verdict = "match" if rep.match else "MISMATCH"
    out = sys.stdout if args.output else sys.stderr
    print(f"{verdict}: machine reachable={rep.machine_reachable} cache exist-hit={rep.cache_exist_hit} "
          f"(r={rep.registers}, K={rep.assoc}, {rep.machine_edges} -> {rep.instance_edges} edges)", file=out)
    return 0 if rep.match else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            return _cmd_analyze(args, args.engine)
        if args.command == "oracle":
            return _cmd_analyze(args, "oracle")
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_reduce(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InputError, ProgramError, PolicyError, BrmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
