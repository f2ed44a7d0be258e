import json

import pytest
from hypothesis import given, settings, strategies as st

from treerecomp.compressor import Compressor
from treerecomp.generators import random_grammar, random_tree
from treerecomp.grammar import parse_grammar, serialize_grammar, trivial_grammar
from treerecomp.normalizer import to_cnf, to_handle
from treerecomp.simulator import (
    N0_NEW,
    SimulationError,
    TrackedPair,
    replay,
    simulate,
    simulate_phase,
    step_from_json,
    step_to_json,
)
from treerecomp.tree import SymbolTable


def _pair(text: str) -> TrackedPair:
    return TrackedPair(parse_grammar(text))


def _text(tp: TrackedPair) -> str:
    return serialize_grammar(tp.grammar())


def _sym(tp: TrackedPair, name: str) -> int:
    return tp.table.lookup(name)


def test_pop_replaces_single_letter_rule():
    tp = _pair("A1(y) -> a(y)\nA2 -> A1(b(c))")
    tp.pop({_sym(tp, "a")}, {_sym(tp, "b")})
    assert _text(tp) == "A2 -> a(b(c))\n"
    tp.check_sync()


def test_pop_on_both_sides():
    tp = _pair("A1(y) -> b(f(c,a(y)))\nS -> e(A1(c))")
    rec = tp.pop({_sym(tp, "a")}, {_sym(tp, "b")})
    assert _text(tp) == "A1(y1) -> f(c,y1)\nS -> e(b(A1(a(c))))\n"
    assert rec.credit == 4 and rec.credit <= rec.bound
    tp.check_sync()


def test_pop_without_matching_letters_changes_nothing():
    tp = _pair("A1(y) -> a(y)\nS -> f(A1(c),d)")
    before = _text(tp)
    tp.pop({_sym(tp, "d")}, {_sym(tp, "c")})
    assert _text(tp) == before


def test_pop_rejects_overlapping_sides():
    tp = _pair("S -> a(c)")
    with pytest.raises(ValueError):
        tp.pop({_sym(tp, "a")}, {_sym(tp, "a")})


def test_rem_cr_chains_eliminates_chain_rule():
    tp = _pair("A1(y) -> a(a(y))\nA2 -> a(A1(a(c)))")
    tp.rem_cr_chains()
    assert _text(tp) == "A2 -> a(a(a(a(c))))\n"


def test_rem_cr_chains_cascades():
    tp = _pair("A1(y) -> a(a(y))\nA2(y) -> a(A1(b(y)))\nS -> A2(c)")
    tp.rem_cr_chains()
    assert _text(tp) == "S -> a(a(a(b(c))))\n"
    tp.check_sync()


def test_rem_cr_chains_without_unary_letters():
    tp = _pair("A -> f(c,d)\nS -> g(A,A,c)")
    before = _text(tp)
    tp.rem_cr_chains()
    assert _text(tp) == before


def test_gen_pop_pops_handle_down():
    tp = _pair("A1(y) -> f(c,y)\nA2 -> A1(d)")
    tp.gen_pop()
    assert _text(tp) == "A2 -> f(c,d)\n"
    tp.check_sync()


def test_gen_pop_then_leaf_compression_matches_tree():
    g = parse_grammar("A1(y) -> f(c,y)\nA2 -> A1(d)")
    tp, comp = simulate(g, phases=1)
    assert comp.size == 1
    assert len(tp.order) == 1


def test_gen_pop_replaces_constant_rule():
    tp = _pair("A -> c\nS -> f(A,A)")
    rec = tp.gen_pop()
    assert _text(tp) == "S -> f(c,c)\n"
    assert rec.credit == 4 <= rec.bound


def test_gen_pop_moves_wide_arm_into_new_rule():
    tp = _pair("A1(y) -> a(f(b(c),y))\nS -> f(e,A1(c))")
    tp.gen_pop()
    new = [a for a in tp.order if tp.kind[a] == N0_NEW]
    assert len(new) == 1
    text = _text(tp)
    name = tp.table.names[new[0]]
    assert f"{name} -> b(c)" in text
    assert f"S -> f(e,A1(f({name},c)))" in text
    tp.check_sync()
    tp.check_invariants()


def test_marked_rule_without_handle_is_an_error():
    tp = TrackedPair(parse_grammar("A1(y) -> y\nS -> A1(c)"), strict=False)
    # an identity rule applied to a constant has no handle to pop
    with pytest.raises(SimulationError):
        tp.gen_pop()


def test_initial_mismatch_is_reported():
    g = parse_grammar("S -> a(c)")
    t = random_tree(3, 2, seed=0, table=g.table)
    with pytest.raises(SimulationError):
        TrackedPair(g, t)


def test_trivial_grammar_stays_synced():
    t = random_tree(400, 3, seed=2)
    tp, comp = simulate(trivial_grammar(t), phases=99, strict=False)
    assert comp.size == 1
    assert len(tp.order) == 1


def _handle_pair(seed: int):
    g = random_grammar(seed, size=80, max_rank=3, max_nt_rank=2, max_expansion=5000)
    return to_handle(to_cnf(g))


def test_phase_replay_with_snapshots():
    h = _handle_pair(11)
    tp = TrackedPair(h)
    comp = Compressor(tp.tree, snapshots=True)
    while comp.size > 1:
        start = len(comp.steps)
        comp.run_phase()
        simulate_phase(tp, comp.steps[start:])
    for rec in tp.counters.calls:
        if rec.bound is not None:
            assert rec.credit <= rec.bound


def test_trace_json_roundtrip_and_replay():
    h = _handle_pair(3)
    text = serialize_grammar(h)
    tp = TrackedPair(h)
    comp = Compressor(tp.tree, trace=True)
    while comp.size > 1:
        comp.run_phase()
    lines = [json.dumps(step_to_json(st, h.table)) for st in comp.steps]
    g2 = parse_grammar(text)
    steps = [step_from_json(json.loads(x), g2.table) for x in lines]
    assert [s.kind for s in steps] == [s.kind for s in comp.steps]
    out = replay(g2, steps)
    assert len(out.order) == 1


def test_tampered_trace_is_caught():
    h = _handle_pair(3)
    text = serialize_grammar(h)
    comp = Compressor(TrackedPair(h).tree, trace=True)
    while comp.size > 1:
        comp.run_phase()
    objs = [step_to_json(st, h.table) for st in comp.steps]
    victim = next(o for o in objs if o["kind"] == "pair" and o["up"] and o["down"])
    victim["up"], victim["down"] = victim["down"], victim["up"]
    g2 = parse_grammar(text)
    steps = [step_from_json(o, g2.table) for o in objs]
    with pytest.raises(SimulationError):
        replay(g2, steps)


def test_unknown_symbol_in_trace():
    with pytest.raises(ValueError):
        step_from_json({"phase": 1, "kind": "pair", "up": ["zz"], "down": [], "keys": []}, SymbolTable())


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_simulation_property(seed):
    tp, comp = simulate(_handle_pair(seed), phases=3)
    c = tp.counters
    assert c.g0_new <= c.n1 * max(0, tp.r - 1)
    assert c.g1 <= c.n1
