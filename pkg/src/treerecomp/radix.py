"""Linear-time radix sorting of digit sequences.

Digits are integers in ``[1..k]``.  Both sorts are stable and return a
permutation of the input; the ``order`` functions return indices, the
``sort`` functions return the keys (optionally zipped with payloads).

An optional :class:`SortStats` collects the number of bucket touches, which
is the unit the linear-time claims are measured in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence


# bucket touches of radix_order_varlen are at most 5T + k + m + 2 for m keys
# of total length T; with every length counted as at least 1 that is below
# C_RADIX * (k + sum of lengths)
C_RADIX = 6


@dataclass
class SortStats:
    bucket_touches: int = 0


def _check_digits(keys: Sequence[Sequence[int]], k: int) -> None:
    for i, key in enumerate(keys):
        for d in key:
            if d < 1 or d > k:
                raise ValueError(f"digit {d} of key {i} is outside [1..{k}]")


def _max_digit(keys: Sequence[Sequence[int]]) -> int:
    best = 1
    for key in keys:
        if key:
            top = max(key)
            if top > best:
                best = top
    return best


def radix_order_fixed(
    keys: Sequence[Sequence[int]],
    k: int | None = None,
    stats: SortStats | None = None,
    check: bool = True,
) -> list[int]:
    """Stable lexicographic order of equal-length keys (LSD counting sort)."""
    m = len(keys)
    if m == 0:
        return []
    w = len(keys[0])
    for key in keys:
        if len(key) != w:
            raise ValueError("radix_order_fixed needs keys of one common length")
    if k is None:
        k = _max_digit(keys)
    elif check:
        _check_digits(keys, k)
    order = list(range(m))
    buckets: list[list[int]] = [[] for _ in range(k + 1)]
    touches = 0
    for d in range(w - 1, -1, -1):
        for i in order:
            buckets[keys[i][d]].append(i)
        order = []
        for b in buckets:
            if b:
                order.extend(b)
                b.clear()
        touches += m + k + 1
    if stats is not None:
        stats.bucket_touches += touches
    return order


def radix_sort_fixed(
    records: Sequence[Sequence[int]],
    payloads: Sequence[Any] | None = None,
    k: int | None = None,
    stats: SortStats | None = None,
) -> list[Any]:
    order = radix_order_fixed(records, k, stats)
    if payloads is None:
        return [records[i] for i in order]
    return [(records[i], payloads[i]) for i in order]


def radix_order_varlen(
    keys: Sequence[Sequence[int]],
    k: int | None = None,
    stats: SortStats | None = None,
    check: bool = True,
) -> list[int]:
    """Stable lexicographic order of keys of varying length.

    A proper prefix sorts before its extensions.  Runs in O(k + sum of
    lengths): the digits occurring at each position are precomputed, so a
    round only visits occupied buckets.  Buckets are allocated once and
    emptied as they are read, never by sweeping the whole array.
    """
    m = len(keys)
    if m == 0:
        return []
    if k is None:
        k = _max_digit(keys)
    elif check:
        _check_digits(keys, k)
    longest = 0
    total = 0
    for key in keys:
        n = len(key)
        total += n
        if n > longest:
            longest = n
    touches = 0

    # pos[j]: sorted distinct digits at position j (1-based), obtained by
    # sorting all (position, digit) pairs: by digit, then stably by position
    by_digit: list[list[int]] = [[] for _ in range(k + 1)]
    for key in keys:
        for j, d in enumerate(key, 1):
            by_digit[d].append(j)
    by_pos: list[list[int]] = [[] for _ in range(longest + 1)]
    for d in range(1, k + 1):
        for j in by_digit[d]:
            by_pos[j].append(d)
    touches += 2 * total + k + longest + 2
    pos: list[list[int]] = []
    for digits in by_pos:
        uniq: list[int] = []
        prev = 0
        for d in digits:
            if d != prev:
                uniq.append(d)
                prev = d
        pos.append(uniq)
    del by_digit, by_pos

    new: list[list[int]] = [[] for _ in range(longest + 1)]
    for i, key in enumerate(keys):
        new[len(key)].append(i)
    touches += m

    buckets: list[list[int]] = [[] for _ in range(k + 1)]
    current: list[int] = []
    for j in range(longest, 0, -1):
        current = new[j] + current
        idx = j - 1
        for i in current:
            buckets[keys[i][idx]].append(i)
        out: list[int] = []
        for d in pos[j]:
            b = buckets[d]
            out.extend(b)
            b.clear()
        touches += len(current) + len(pos[j])
        current = out
    current = new[0] + current
    if stats is not None:
        stats.bucket_touches += touches
    return current


def radix_sort_varlen(
    keys: Sequence[Sequence[int]],
    payloads: Sequence[Any] | None = None,
    k: int | None = None,
    stats: SortStats | None = None,
) -> list[Any]:
    order = radix_order_varlen(keys, k, stats)
    if payloads is None:
        return [keys[i] for i in order]
    return [(keys[i], payloads[i]) for i in order]
