import random

import pytest
from hypothesis import given, settings, strategies as st

from treerecomp.radix import (
    C_RADIX,
    SortStats,
    radix_order_fixed,
    radix_order_varlen,
    radix_sort_fixed,
    radix_sort_varlen,
)


def test_fixed_small():
    assert radix_sort_fixed([(2, 1), (1, 2), (1, 1)]) == [(1, 1), (1, 2), (2, 1)]


def test_fixed_empty():
    assert radix_sort_fixed([]) == []


def test_varlen_prefix_before_extension():
    words = ["ba", "ab", "a"]
    keys = [[ord(ch) - 96 for ch in w] for w in words]
    out = radix_sort_varlen(keys)
    assert ["".join(chr(d + 96) for d in k) for k in out] == ["a", "ab", "ba"]


def test_varlen_stability_on_identical_keys():
    keys = [[3, 1, 2]] * 50
    assert radix_order_varlen(keys) == list(range(50))


def test_varlen_handles_empty_keys():
    keys = [[2], [], [1, 1], []]
    assert radix_order_varlen(keys) == [1, 3, 2, 0]


def test_digit_out_of_range():
    with pytest.raises(ValueError):
        radix_order_varlen([[0, 1]], k=3)
    with pytest.raises(ValueError):
        radix_order_fixed([(4, 1)], k=3)


def test_fixed_large_against_sorted():
    rng = random.Random(1)
    keys = [(rng.randint(1, 300), rng.randint(1, 300)) for _ in range(10**5)]
    assert radix_sort_fixed(keys) == sorted(keys)


def test_varlen_large_against_sorted():
    rng = random.Random(2)
    keys = [[rng.randint(1, 256) for _ in range(rng.randint(0, 19))] for _ in range(10**5)]
    stats = SortStats()
    assert radix_sort_varlen(keys, k=256, stats=stats) == sorted(keys)
    assert stats.bucket_touches <= C_RADIX * (256 + sum(max(1, len(x)) for x in keys))


def test_payloads_follow_keys():
    keys = [[2], [1], [2, 1]]
    assert radix_sort_varlen(keys, ["x", "y", "z"]) == [([1], "y"), ([2], "x"), ([2, 1], "z")]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(1, 6), max_size=6), max_size=40))
def test_varlen_matches_stable_sort(keys):
    order = radix_order_varlen(keys)
    assert order == sorted(range(len(keys)), key=lambda i: keys[i])
