import pytest
from hypothesis import given, settings, strategies as st

from treerecomp.generators import caterpillar, random_tree
from treerecomp.tree import (
    RankConflictError,
    SymbolTable,
    TermSyntaxError,
    count_by_rank,
    enumerate_maximal_chains,
    parse_term,
    serialize_term,
    trees_equal,
)

TWO_BRANCHES = "f(a(b(c)),a(b(d)))"
UNARY_WORD = "b(a(a(a(c))))"


def test_parse_constant():
    t, table = parse_term("c")
    assert t.size == 1
    assert table.ranks[t.labels[t.root]] == 0


def test_parse_two_branch_tree():
    t, table = parse_term(TWO_BRANCHES)
    # seven labels: f, a, b, c, a, b, d
    assert t.size == 7
    assert table.ranks[t.labels[t.root]] == 2


def test_rank_conflict():
    with pytest.raises(RankConflictError):
        parse_term("f(a,a(c))")


@pytest.mark.parametrize("bad", ["f(a", "f(a,,b)", "", "f(a)b", "(a)"])
def test_syntax_errors(bad):
    with pytest.raises(TermSyntaxError):
        parse_term(bad)


@pytest.mark.parametrize("text", ["c", TWO_BRANCHES, UNARY_WORD])
def test_serialize_roundtrip_examples(text):
    t, _ = parse_term(text)
    assert serialize_term(t) == text


def test_whitespace_is_ignored():
    t, _ = parse_term(" f( a(b(c)) ,\n a(b(d)) ) ")
    assert serialize_term(t) == TWO_BRANCHES


def test_chains_on_unary_word():
    t, _ = parse_term(UNARY_WORD)
    rep = enumerate_maximal_chains(t)
    assert [(t.table.names[c.letter], c.length) for c in rep.chains] == [("a", 3)]
    assert rep.maximal_chain_count == 1


def test_chains_on_two_branches():
    t, _ = parse_term(TWO_BRANCHES)
    rep = enumerate_maximal_chains(t)
    assert rep.chains == []
    assert rep.maximal_chain_count == 2


def test_chains_on_constant():
    t, _ = parse_term("c")
    rep = enumerate_maximal_chains(t)
    assert rep.chains == [] and rep.maximal_chain_count == 0


@pytest.mark.parametrize("text,counts", [(TWO_BRANCHES, (2, 4, 1)), (UNARY_WORD, (1, 4, 0)), ("c", (1, 0, 0))])
def test_count_by_rank(text, counts):
    t, _ = parse_term(text)
    assert count_by_rank(t) == counts


def test_deep_tree_has_no_recursion_limit():
    t = caterpillar(200_000)
    text = serialize_term(t)
    back, _ = parse_term(text)
    assert trees_equal(t, back)


def test_compact_keeps_preorder():
    t = random_tree(300, 3, seed=4)
    c = t.compact()
    assert c.labels == t.preorder_labels()
    c.check()


def test_fresh_names_do_not_collide():
    table = SymbolTable()
    table.add("_chain0", 1)
    x = table.fresh("chain", 1)
    assert table.names[x] != "_chain0"
    assert len(set(table.names)) == len(table.names)


def test_random_tree_rejects_impossible_shapes():
    with pytest.raises(ValueError):
        random_tree(3, 0)
    with pytest.raises(ValueError):
        random_tree(0, 2)


def test_rename():
    table = SymbolTable()
    x = table.add("A", 0, "nonterminal")
    table.rename(x, "S")
    assert table.lookup("S") == x and table.lookup("A") is None
    table.add("T", 0)
    with pytest.raises(ValueError):
        table.rename(x, "T")


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 400), st.integers(0, 4), st.integers(0, 10**6))
def test_serialize_parse_roundtrip(n, r, seed):
    if r == 0:
        n = 1
    t = random_tree(n, r, seed)
    back, _ = parse_term(serialize_term(t), t.table)
    assert trees_equal(t, back)
    assert sum(count_by_rank(t)) == n
