import pytest
from hypothesis import given, settings, strategies as st

from treerecomp.generators import random_grammar
from treerecomp.grammar import GrammarError, expand_preorder, grammar_size, parse_grammar, validate
from treerecomp.normalizer import (
    C_CNF,
    C_HANDLE,
    C_RANK1,
    cnf_violation,
    handle_size_bound,
    handle_violation,
    is_handle,
    normalize,
    rank1_occurrences,
    to_cnf,
    to_handle,
)


def _names(g):
    return [g.table.names[x] for x in expand_preorder(g)]


def _rhs_shapes(g):
    """(rank of lhs, labels of rhs in preorder) per rule, with nonterminals as 'N<rank>'."""
    nts = g.index()
    out = []
    for p in g.productions:
        labs = []
        for lab in p.rhs.preorder_labels():
            if lab < 0:
                labs.append("y")
            elif lab in nts:
                labs.append(f"N{g.table.ranks[lab]}")
            else:
                labs.append(g.table.names[lab])
        out.append((g.table.ranks[p.lhs], labs))
    return out


@pytest.mark.parametrize("text", ["S -> f(c,c)", "S -> a(b(c))", "S -> f(a(c),b(c))"])
def test_cnf_keeps_eval(text):
    g = parse_grammar(text)
    c = to_cnf(g)
    assert cnf_violation(c) is None
    assert validate(c) == []
    assert _names(c) == _names(g)


def test_cnf_of_unary_word_has_one_rule_per_letter():
    c = to_cnf(parse_grammar("S -> a(b(c))"))
    assert len(c.productions) == 5
    assert grammar_size(c) <= C_CNF * 3


def test_cnf_is_stable_on_cnf_input():
    c = to_cnf(parse_grammar("S -> f(a(c),b(c))"))
    again = to_cnf(c)
    assert grammar_size(again) == grammar_size(c)
    assert _names(again) == _names(c)


def test_handle_of_two_branches():
    g = parse_grammar("S -> f(a(c),b(c))")
    h = normalize(g)
    assert is_handle(h)
    assert _names(h) == ["f", "a", "c", "b", "c"]


def test_rank1_merge_creates_composed_rule():
    g = parse_grammar("B(y) -> f(c,y)\nC(y) -> g(d,y,c)\nA(y) -> B(C(y))\nS -> A(A(e))")
    h = normalize(g)
    assert is_handle(h)
    assert _names(h) == _names(g)
    assert (1, ["N1", "N1", "y"]) in _rhs_shapes(h)


def test_rank0_substitution_creates_applied_rule():
    g = parse_grammar("B(y) -> f(c,y)\nC(y) -> g(d,y,c)\nA(y) -> B(C(y))\nS -> A(A(e))")
    h = normalize(g)
    assert (0, ["N1", "e"]) in _rhs_shapes(h)


def test_to_handle_requires_cnf():
    with pytest.raises(GrammarError):
        to_handle(parse_grammar("S -> f(a(c),b(c))"))


def test_rank_two_nonterminal_is_not_handle():
    g = parse_grammar("A(y1,y2) -> f(y1,y2)\nS -> A(c,c)")
    msg = handle_violation(g)
    assert msg is not None and "HG1" in msg


def test_handle_sequence_ending_in_constant_is_fine():
    assert is_handle(parse_grammar("A(y) -> a(y)\nS -> A(f(c,f(c,c)))"))


def test_two_wide_children_are_not_handle():
    msg = handle_violation(parse_grammar("S -> f(f(c,c),f(c,c))"))
    assert msg is not None and "HG3" in msg


def test_two_rank1_nonterminals_in_rank0_rule_are_not_handle():
    msg = handle_violation(parse_grammar("A(y) -> a(y)\nS -> A(A(c))"))
    assert msg is not None and "HG3" in msg


def test_skeleton_log():
    g = parse_grammar("B(y) -> a(f(y,c))\nS -> g(B(c),B(d),c)")
    log = []
    to_handle(to_cnf(g), log)
    assert log
    for rec in log:
        assert not rec.violations
        assert rec.nodes <= rec.bound


def test_constants_are_frozen():
    assert (C_CNF, C_HANDLE, C_RANK1) == (3, 21, 15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(0, 3))
def test_normalizer_property(seed, r, k):
    g = random_grammar(seed, size=60, max_rank=r, max_nt_rank=k, max_expansion=20000)
    c = to_cnf(g)
    assert cnf_violation(c) is None
    assert grammar_size(c) <= C_CNF * grammar_size(g)
    log = []
    h = to_handle(c, log)
    assert handle_violation(h) is None
    assert _names(h) == _names(g)
    assert grammar_size(h) <= handle_size_bound(g)
    assert rank1_occurrences(h) <= C_RANK1 * grammar_size(g)
    assert all(not x.violations and x.nodes <= x.bound for x in log)
