import json
import subprocess
import sys

import pytest

from pdcache.cli import COLUMNS, analyze, format_rows, main
from pdcache.policy_sim import explicit_oracle_classify
from pdcache.program import parse_program


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_recursive_matches_oracle(data, capsys):
    code, out, _ = run(capsys, "analyze", data / "recursive.prog")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split("\t") == list(COLUMNS)
    p = parse_program((data / "recursive.prog").read_text())
    orc = {(s.proc, s.src, s.dst, s.block): c.verdict for s, c in explicit_oracle_classify(p, "lru", 4).items()}
    got = {tuple(l.split("\t")[:4]): l.split("\t")[4] for l in lines[1:]}
    assert got == orc
    keys = [tuple(l.split("\t")[:4]) for l in lines[1:]]
    assert keys == sorted(keys)


def test_unknown_rows_carry_witnesses(data):
    rows = analyze((data / "recursive.prog").read_text(), engine="exact-only")
    for r in rows:
        if r["class"] == "definitely-unknown":
            assert r["witness"].startswith("hit s=[") and "; miss s=[" in r["witness"]
        else:
            assert r["witness"] == ""


def test_no_witness_flag(data):
    rows = analyze((data / "recursive.prog").read_text(), engine="exact-only", witnesses=False)
    assert all("run=" not in r["witness"] for r in rows)


def test_json_and_tsv_agree(data, capsys):
    _, tsv, _ = run(capsys, "analyze", data / "recursive.prog", "-k", 2)
    _, js, _ = run(capsys, "analyze", data / "recursive.prog", "-k", 2, "--format", "json")
    lines = tsv.splitlines()
    as_dicts = [dict(zip(COLUMNS, l.split("\t"))) for l in lines[1:]]
    assert json.loads(js) == as_dicts


def test_output_is_deterministic(data, capsys):
    first = run(capsys, "analyze", data / "recursive.prog", "--initial", "arbitrary")[1]
    assert run(capsys, "analyze", data / "recursive.prog", "--initial", "arbitrary")[1] == first


@pytest.mark.parametrize("engine", ["auto", "exact-only", "oracle"])
def test_engines_agree(data, engine):
    rows = analyze((data / "recursive.prog").read_text(), assoc=3, engine=engine)
    base = analyze((data / "recursive.prog").read_text(), assoc=3, engine="oracle")
    assert [r["class"] for r in rows] == [r["class"] for r in base]


def test_fast_only_may_leave_rows_open(data):
    rows = analyze((data / "recursive.prog").read_text(), engine="fast-only")
    assert {r["class"] for r in rows} <= {"always-hit", "always-miss", "definitely-unknown", "unreachable",
                                          "inconclusive"}
    assert all(r["method"] in ("interval", "exist-bounds", "reachability", "-") for r in rows)


def test_slice(data, capsys):
    _, out, _ = run(capsys, "analyze", data / "sets.prog", "-k", 1, "--slice", "a,e")
    blocks = {l.split("\t")[3] for l in out.splitlines()[1:]}
    assert blocks == {"a", "e"}


def test_oracle_subcommand_other_policies(data, capsys):
    for policy, k in (("fifo", 2), ("plru", 2), ("nmru", 3)):
        code, out, _ = run(capsys, "oracle", data / "recursive.prog", "--policy", policy, "-k", k)
        assert code == 0
        assert all(l.split("\t")[5] == "oracle" for l in out.splitlines()[1:])


@pytest.mark.parametrize("argv", [
    ["analyze", "{data}/missing.prog"],
    ["analyze", "{data}/recursive.prog", "--policy", "plru", "-k", "3"],
    ["analyze", "{data}/recursive.prog", "--policy", "fifo", "--engine", "exact-only"],
    ["analyze", "{data}/sample.brm"],
    ["reduce-brm", "{data}/recursive.prog"],
    ["simulate", "--policy", "plru", "-k", "3", "a"],
    ["simulate", "--policy", "nmru", "-k", "2", "--from", "a b"],
])
def test_input_errors_exit_2(data, capsys, argv):
    code, _, err = run(capsys, *[a.format(data=data) for a in argv])
    assert code == 2 and err.startswith("error:")


def test_budget_exit_3(data, capsys):
    code, _, err = run(capsys, "analyze", data / "recursive.prog", "--policy", "fifo", "--budget", 10)
    assert code == 3 and "budget" in err


def test_simulate(capsys):
    assert run(capsys, "simulate", "-k", 4, "--from", "a b c d", "b")[1] == "b a c d\n"
    assert run(capsys, "simulate", "-k", 4, "--from", "a b c d", "e")[1] == "e a b c\n"
    assert run(capsys, "simulate", "--policy", "fifo", "-k", 4, "--from", "a b c d", "b")[1] == "a b c d\n"
    assert run(capsys, "simulate", "-k", 4, "--trace", "a b c d b")[1].splitlines()[-1] == "b d c a"
    assert run(capsys, "simulate", "-k", 2)[1] == ""
    assert run(capsys, "simulate", "--policy", "plru", "-k", 4, "a")[1] == "[a - - -] 110\n"
    assert run(capsys, "simulate", "--policy", "nmru", "-k", 2, "a", "b")[1] == "a^1\na^0 b^1\n"


def test_reduce_brm(data, capsys, tmp_path):
    code, out, _ = run(capsys, "reduce-brm", data / "sample.brm")
    assert code == 0 and "assoc 3" in out.splitlines()
    dest = tmp_path / "inst.prog"
    code, out, _ = run(capsys, "reduce-brm", data / "sample.brm", "-o", dest, "--validate")
    assert code == 0 and out.startswith("match")
    assert parse_program(dest.read_text()).assoc == 3


def test_reduce_brm_mismatch_exit_1(tmp_path, capsys):
    m = tmp_path / "one.brm"
    m.write_text("registers 1\nproc 1 start s end t\nedge 1 s u assign 1 1\nedge 1 u t guard 1 1\n")
    assert run(capsys, "reduce-brm", m, "--validate")[0] == 0
    code, _, err = run(capsys, "reduce-brm", m, "--validate", "--no-pad")
    assert code == 1 and "MISMATCH" in err


def test_reduce_brm_zero_registers(tmp_path, capsys):
    m = tmp_path / "zero.brm"
    m.write_text("registers 0\nproc 1 start s end t\n")
    assert run(capsys, "reduce-brm", m)[0] == 2


def test_format_rows_empty():
    assert format_rows([], "tsv") == "\t".join(COLUMNS) + "\n"
    assert json.loads(format_rows([], "json")) == []


def test_module_entry_point(data):
    res = subprocess.run([sys.executable, "-m", "pdcache", "simulate", "-k", "2", "a", "b"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "a\nb a\n"
