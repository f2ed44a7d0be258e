import json

import pytest

from treerecomp.cli import main
from treerecomp.generators import random_grammar, random_tree
from treerecomp.grammar import serialize_grammar
from treerecomp.tree import serialize_term

TWO_BRANCHES = "f(a(b(c)),a(b(d)))"


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def term_file(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text(TWO_BRANCHES + "\n")
    return p


def test_encode_decode_roundtrip(tmp_path, term_file, capsys):
    g = tmp_path / "g.txt"
    assert _run(["encode", "-i", str(term_file), "-o", str(g)], capsys)[0] == 0
    code, out, _ = _run(["decode", "-i", str(g)], capsys)
    assert code == 0 and out.strip() == TWO_BRANCHES


def test_encode_constant(tmp_path, capsys):
    p = tmp_path / "c.txt"
    p.write_text("c")
    code, out, _ = _run(["encode", "-i", str(p)], capsys)
    assert code == 0 and out == "S -> c\n"


def test_decode_constant(tmp_path, capsys):
    p = tmp_path / "g.txt"
    p.write_text("S -> c\n")
    assert _run(["decode", "-i", str(p)], capsys)[1] == "c\n"


def test_encode_writes_stats_and_trace(tmp_path, capsys):
    p = tmp_path / "t.txt"
    p.write_text(serialize_term(random_tree(500, 3, seed=1)))
    stats, trace = tmp_path / "s.jsonl", tmp_path / "tr.jsonl"
    code, _, _ = _run(["encode", "-i", str(p), "--stats", str(stats), "--trace", str(trace)], capsys)
    assert code == 0
    phases = [json.loads(x) for x in stats.read_text().splitlines()]
    steps = [json.loads(x) for x in trace.read_text().splitlines()]
    assert phases and "size_before" in phases[0]
    assert len(steps) == 3 * len(phases)


def test_outputs_are_deterministic(tmp_path, capsys):
    p = tmp_path / "t.txt"
    p.write_text(serialize_term(random_tree(800, 4, seed=2)))
    first = _run(["encode", "-i", str(p)], capsys)[1]
    second = _run(["encode", "-i", str(p)], capsys)[1]
    assert first == second
    b1 = _run(["bench", "random", "--sizes", "300,600", "--seed", "4", "--no-timing"], capsys)[1]
    b2 = _run(["bench", "random", "--sizes", "300,600", "--seed", "4", "--no-timing"], capsys)[1]
    assert b1 == b2


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("f(a")
    code, _, err = _run(["encode", "-i", str(p)], capsys)
    assert code == 2 and "parse error" in err


def test_invalid_grammar_exit_code(tmp_path, capsys):
    p = tmp_path / "g.txt"
    p.write_text("S -> A(c)\nA(y) -> a(y)\n")
    assert _run(["decode", "-i", str(p)], capsys)[0] == 2


def test_io_error_exit_code(tmp_path, capsys):
    assert _run(["decode", "-i", str(tmp_path / "missing.txt")], capsys)[0] == 3
    p = tmp_path / "t.txt"
    p.write_text("c")
    assert _run(["encode", "-i", str(p), "-o", str(tmp_path / "no" / "such" / "dir")], capsys)[0] == 3


def test_budget_exit_code(tmp_path, capsys):
    p = tmp_path / "g.txt"
    lines = ["A0(y) -> a(y)"] + [f"A{i}(y) -> A{i-1}(A{i-1}(y))" for i in range(1, 20)] + ["S -> A19(c)"]
    p.write_text("\n".join(lines))
    assert _run(["decode", "-i", str(p), "--node-budget", "10"], capsys)[0] == 4


def test_verify(term_file, capsys):
    code, out, _ = _run(["verify", "-i", str(term_file)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["match"] and rep["nodes"] == 7


def test_stats(term_file, capsys):
    code, out, _ = _run(["stats", "-i", str(term_file)], capsys)
    rep = json.loads(out)
    assert code == 0
    assert (rep["constants"], rep["unary"], rep["wide"]) == (2, 4, 1)
    assert rep["phases"] <= rep["phase_bound"]
    assert rep["reasonable_size"] <= 2 * rep["nodes"] - 1


def test_grammar_input_format(tmp_path, capsys):
    p = tmp_path / "g.txt"
    p.write_text("A(y) -> a(b(y))\nS -> f(A(c),A(d))\n")
    code, out, _ = _run(["verify", "-i", str(p), "--format", "grammar"], capsys)
    assert code == 0 and json.loads(out)["nodes"] == 7


def test_bench_families(capsys):
    code, out, _ = _run(["bench", "caterpillar", "--sizes", "2^10..2^12"], capsys)
    reps = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and [r["nodes"] for r in reps] == [1024, 2048, 4096]
    assert all("compress_seconds" in r for r in reps)


def test_bench_single_node(capsys):
    code, out, _ = _run(["bench", "binary", "--sizes", "1"], capsys)
    assert code == 0 and len(out.splitlines()) == 1


def test_bench_planted(capsys):
    code, out, _ = _run(["bench", "planted", "--g", "50", "--max-rank", "3", "--sizes", "1e4", "--no-timing"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["planted_size"] <= 50 and rep["ratio"] > 0


def test_normalize(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text(serialize_grammar(random_grammar(2, size=60, max_rank=3, max_nt_rank=2, max_expansion=5000)))
    h, stats = tmp_path / "h.txt", tmp_path / "n.jsonl"
    assert _run(["normalize", "-i", str(g), "-o", str(h), "--stats", str(stats)], capsys)[0] == 0
    rep = json.loads(stats.read_text())
    assert rep["is_handle"] and rep["skeleton_violations"] == 0
    code, out, _ = _run(["verify", "-i", str(h), "--format", "grammar"], capsys)
    assert code == 0


def test_simulate_and_replay(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text(serialize_grammar(random_grammar(0, size=150, max_rank=3, max_nt_rank=2, max_expansion=50000)))
    h = tmp_path / "h.txt"
    _run(["normalize", "-i", str(g), "-o", str(h)], capsys)
    trace, counters = tmp_path / "tr.jsonl", tmp_path / "c.jsonl"
    code, out, _ = _run(["simulate", "-i", str(h), "--phases", "99", "--trace", str(trace), "--stats", str(counters)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["synced"] and rep["worst_credit_ratio"] <= 1
    assert all(json.loads(x)["kind"] in ("pop", "gen_pop", "rem_cr_chains") for x in counters.read_text().splitlines())
    code, out, _ = _run(["simulate", "-i", str(h), "--replay", str(trace)], capsys)
    assert code == 0 and json.loads(out)["steps"] == rep["steps"]
    # swapping the sides of a pair step must be detected
    objs = [json.loads(x) for x in trace.read_text().splitlines()]
    victim = next(o for o in objs if o["kind"] == "pair" and o["up"] and o["down"])
    victim["up"], victim["down"] = victim["down"], victim["up"]
    bad = tmp_path / "bad.jsonl"
    bad.write_text("".join(json.dumps(o) + "\n" for o in objs))
    code, _, err = _run(["simulate", "-i", str(h), "--replay", str(bad)], capsys)
    assert code == 1 and "diverged" in err


def test_simulate_term_input(term_file, capsys):
    code, out, _ = _run(["simulate", "-i", str(term_file), "--format", "term", "--phases", "9"], capsys)
    assert code == 0 and json.loads(out)["synced"]


def test_simulate_rejects_non_handle_without_normalizing(tmp_path, capsys):
    p = tmp_path / "g.txt"
    p.write_text("A(y1,y2) -> f(y1,y2)\nS -> A(c,c)\n")
    assert _run(["simulate", "-i", str(p), "--no-normalize"], capsys)[0] == 2


def test_large_caterpillar_grammar_is_short(tmp_path, capsys):
    p = tmp_path / "cat.txt"
    p.write_text("a(" * 999_999 + "c" + ")" * 999_999)
    code, out, _ = _run(["encode", "-i", str(p)], capsys)
    assert code == 0 and len(out.splitlines()) <= 64
