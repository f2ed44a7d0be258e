"""Deterministic tree and grammar generators for tests and benchmarks.

Every generator takes a ``random.Random`` (or a seed) so that a run is fully
determined by its seed.
"""

from __future__ import annotations

import random

from .grammar import Production, SlcfGrammar, expansion_sizes, with_start
from .tree import RankedTree, SymbolTable

_RANK_LETTER = {0: "c", 1: "a", 2: "f", 3: "g", 4: "h"}


def letter_name(rank: int, i: int) -> str:
    return f"{_RANK_LETTER.get(rank, f'r{rank}_')}{i}"


def _rng(seed: int | random.Random) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def _alphabet(table: SymbolTable, max_rank: int, per_rank: list[int]) -> list[list[int]]:
    return [
        [table.add(letter_name(k, i), k) for i in range(per_rank[k])]
        for k in range(max_rank + 1)
    ]


def caterpillar(n: int, table: SymbolTable | None = None) -> RankedTree:
    """``a^(n-1)(c)``."""
    table = table or SymbolTable()
    a = table.add("a", 1)
    c = table.add("c", 0)
    t = RankedTree(table)
    v = t.add_node(c)
    for _ in range(n - 1):
        v = t.add_node(a, [v])
    t.root = v
    return t


def comb(n: int, table: SymbolTable | None = None) -> RankedTree:
    """Right comb ``f(c, f(c, ... ))``; an even size ends in ``a(c)``."""
    table = table or SymbolTable()
    f = table.add("f", 2)
    c = table.add("c", 0)
    t = RankedTree(table)
    inner = (n - 1) // 2
    v = t.add_node(c)
    if n % 2 == 0:
        v = t.add_node(table.add("a", 1), [v])
    for _ in range(inner):
        v = t.add_node(f, [t.add_node(c), v])
    t.root = v
    return t


def binary(n: int, table: SymbolTable | None = None) -> RankedTree:
    """Heap-shaped binary tree with ``n`` nodes (a full one when n = 2^h - 1)."""
    table = table or SymbolTable()
    f = table.add("f", 2)
    c = table.add("c", 0)
    t = RankedTree(table)
    ids = [0] * (n + 1)
    for i in range(n, 0, -1):
        ch = [ids[j] for j in (2 * i, 2 * i + 1) if j <= n]
        if len(ch) == 1:
            label = table.add("a", 1)
        else:
            label = f if ch else c
        ids[i] = t.add_node(label, ch)
    t.root = ids[1]
    return t


def random_tree(
    n: int,
    max_rank: int = 4,
    seed: int | random.Random = 0,
    table: SymbolTable | None = None,
    letters_per_rank: int = 3,
    weights: list[float] | None = None,
) -> RankedTree:
    """Random ranked tree with exactly ``n`` nodes.

    Nodes are placed into uniformly chosen open slots; the rank of each new
    node is drawn from ``weights`` restricted to ranks that still allow the
    tree to close with exactly ``n`` nodes.
    """
    if n < 1:
        raise ValueError("a tree has at least one node")
    if max_rank == 0 and n > 1:
        raise ValueError("only single-node trees have no letter of positive rank")
    rng = _rng(seed)
    table = table or SymbolTable()
    if weights is None:
        weights = [rng.random() + 0.05 for _ in range(max_rank + 1)]
        if max_rank >= 1:
            weights[1] += rng.random() * 2
    alphabet = _alphabet(table, max_rank, [letters_per_rank] * (max_rank + 1))
    t = RankedTree(table)
    labels, children, parent = t.labels, t.children, t.parent
    slots: list[tuple[int, int]] = [(-1, 0)]
    remaining = n
    ranks = list(range(max_rank + 1))
    while remaining > 0:
        j = rng.randrange(len(slots))
        slots[j], slots[-1] = slots[-1], slots[j]
        p, pos = slots.pop()
        s = len(slots)  # open slots besides this one
        hi = min(max_rank, remaining - 1 - s)
        lo = 1 if s == 0 and remaining > 1 else 0
        if hi < lo:
            raise AssertionError("slot bookkeeping broken")
        choices = ranks[lo : hi + 1]
        k = rng.choices(choices, weights[lo : hi + 1])[0]
        v = len(labels)
        labels.append(rng.choice(alphabet[k]))
        children.append([-1] * k)
        parent.append(p)
        if p < 0:
            t.root = v
        else:
            children[p][pos] = v
        for i in range(k):
            slots.append((v, i))
        remaining -= 1
    t.size = n
    return t


def random_word_tree(
    n: int, letters: int = 3, seed: int | random.Random = 0, table: SymbolTable | None = None
) -> RankedTree:
    """Unary word over ``letters`` random letters above a constant."""
    rng = _rng(seed)
    table = table or SymbolTable()
    unary = [table.add(letter_name(1, i), 1) for i in range(letters)]
    c = table.add("c0", 0)
    t = RankedTree(table)
    v = t.add_node(c)
    for _ in range(n - 1):
        v = t.add_node(rng.choice(unary), [v])
    t.root = v
    return t


FAMILIES = {
    "caterpillar": lambda n, seed: caterpillar(n),
    "comb": lambda n, seed: comb(n),
    "binary": lambda n, seed: binary(n),
    "random": lambda n, seed: random_tree(n, 4, seed),
    "word": lambda n, seed: random_word_tree(n, 3, seed),
}


# ---------------------------------------------------------------------------
# grammars


def _pattern(
    rng: random.Random,
    table: SymbolTable,
    k: int,
    inner: list[int],
    leaves: list[int],
    nodes: int,
) -> RankedTree | None:
    """Random rhs with exactly ``k`` parameters, or None if ``k`` is out of reach.

    ``inner`` holds symbols of rank >= 1, ``leaves`` symbols of rank 0.
    About ``nodes`` inner symbols are placed; more are added while there are
    fewer open slots than parameters.
    """
    ranks = table.ranks
    if k > 0 and not inner:
        return None
    if k > 1 and all(ranks[x] < 2 for x in inner):
        return None
    t = RankedTree(table)
    slots: list[tuple[int, int]] = [(-1, 0)]
    placed = 0
    labels, children, parent = t.labels, t.children, t.parent
    while inner and (placed < nodes or len(slots) < k):
        if len(slots) < k:
            pool = [x for x in inner if ranks[x] >= 2]
        else:
            pool = inner
        sym = rng.choice(pool)
        j = rng.randrange(len(slots))
        slots[j], slots[-1] = slots[-1], slots[j]
        p, pos = slots.pop()
        v = len(labels)
        labels.append(sym)
        children.append([-1] * ranks[sym])
        parent.append(p)
        if p < 0:
            t.root = v
        else:
            children[p][pos] = v
        slots.extend((v, i) for i in range(ranks[sym]))
        placed += 1
        if placed > nodes + 4 * k + 8:
            return None
    if len(slots) < k:
        return None
    if placed == 0 and k == 1:
        return None
    # order slots left to right so parameters come out as y1..yk in order
    t.root = t.root if placed else -1
    chosen = set(rng.sample(range(len(slots)), k))
    for idx, (p, pos) in enumerate(slots):
        lab = 0  # placeholder, fixed below
        v = len(labels)
        labels.append(lab)
        children.append([])
        parent.append(p)
        if p < 0:
            t.root = v
        else:
            children[p][pos] = v
        if idx in chosen:
            labels[v] = -1  # renumbered below
        else:
            labels[v] = rng.choice(leaves)
    t.size = len(labels)
    i = 0
    for v in t.preorder():
        if labels[v] < 0:
            i += 1
            labels[v] = -i
    return t


def random_grammar(
    seed: int | random.Random,
    size: int = 60,
    max_rank: int = 3,
    max_nt_rank: int = 3,
    max_expansion: int = 10**5,
    table: SymbolTable | None = None,
) -> SlcfGrammar:
    """Random SLCF grammar of size at most ``size`` (and at least a few nodes).

    Right-hand sides mix letters and earlier nonterminals, preferring recent
    ones so expansions grow.  The start rule is rank 0 and every expansion
    stays within ``max_expansion`` nodes.
    """
    rng = _rng(seed)
    table = table or SymbolTable()
    alphabet = _alphabet(table, max_rank, [2] * (max_rank + 1))
    letters_inner = [x for k in range(1, max_rank + 1) for x in alphabet[k]]
    constants = alphabet[0]
    nts: list[int] = []
    exp: dict[int, int] = {}
    prods: list[Production] = []
    total = 0
    reserve = 6  # kept for the start rule

    def pools(nt_weight: float) -> tuple[list[int], list[int]]:
        use_nt = [x for x in nts[-8:] if rng.random() < nt_weight]
        inner = letters_inner + [x for x in use_nt if table.ranks[x] >= 1] * 3
        leaves = constants + [x for x in use_nt if table.ranks[x] == 0] * 3
        return inner, leaves

    for _ in range(50 * size + 100):
        if total >= size - reserve:
            break
        k = rng.randint(0, max_nt_rank)
        inner, leaves = pools(0.7)
        rhs = _pattern(rng, table, k, inner, leaves, rng.randint(1, 5))
        if rhs is None:
            continue
        cost = sum(1 for lab in rhs.labels if lab >= 0)
        if total + cost > size - reserve:
            continue
        ex = sum(exp.get(lab, 1) for lab in rhs.labels if lab >= 0)
        if ex > max_expansion:
            continue
        lhs = table.fresh("nonterminal", k)
        prods.append(Production(lhs, rhs))
        nts.append(lhs)
        exp[lhs] = ex
        total += cost

    room = max(1, min(reserve, size - total))
    rhs = None
    for _ in range(200):
        inner, leaves = pools(0.9)
        cand = _pattern(rng, table, 0, inner, leaves, rng.randint(1, room))
        if cand is None:
            continue
        cost = sum(1 for lab in cand.labels if lab >= 0)
        ex = sum(exp.get(lab, 1) for lab in cand.labels if lab >= 0)
        if cost <= room and ex <= max_expansion:
            rhs = cand
            break
    if rhs is None:
        rhs = RankedTree(table)
        rhs.root = rhs.add_node(constants[0])
    lhs = table.fresh("nonterminal", 0)
    prods.append(Production(lhs, rhs))
    return SlcfGrammar(table, prods)


def planted_grammar(
    g: int,
    r: int,
    n: int,
    seed: int | random.Random = 0,
    table: SymbolTable | None = None,
) -> SlcfGrammar:
    """Grammar of size at most ``g`` over letters of rank at most ``r``.

    A few productions mix random letters into rank-1 and rank-0 nonterminals,
    then rank-1 nonterminals keep composing the largest earlier ones, which
    doubles the expansion, until it is close to ``n`` nodes or the size
    budget runs out.  Small ``g`` cannot reach large ``n``: the expansion of
    a grammar of size ``g`` is at most exponential in ``g``.  The size of the
    result bounds the smallest grammar of its tree from above.
    """
    rng = _rng(seed)
    table = table or SymbolTable()
    consts = [table.add(letter_name(0, i), 0) for i in range(2)]
    unary = [table.add(letter_name(1, i), 1) for i in range(3)]
    wide = [table.add(letter_name(k, 0), k) for k in range(2, r + 1)]
    prods: list[Production] = []
    sizes: dict[int, int] = {}
    total = 0
    u_nts: list[int] = []
    t_nts: list[int] = []

    def add(k: int, build) -> int:
        nonlocal total
        rhs = RankedTree(table)
        rhs.root = build(rhs)
        rhs.size = len(rhs.labels)
        lhs = table.fresh("nonterminal", k)
        prods.append(Production(lhs, rhs))
        total += sum(1 for lab in rhs.labels if lab >= 0)
        sizes[lhs] = sum(sizes.get(lab, 1) for lab in rhs.labels if lab >= 0)
        return lhs

    def arm(t: RankedTree) -> int:
        if t_nts and rng.random() < 0.5:
            return t.add_node(rng.choice(t_nts[-3:]))
        return t.add_node(rng.choice(consts))

    def handle(t: RankedTree, below: int) -> int:
        """A letter above ``below``: unary, or wide with the other arms filled."""
        if wide and rng.random() < 0.6:
            f = rng.choice(wide)
            hole = rng.randrange(table.ranks[f])
            return t.add_node(f, [below if i == hole else arm(t) for i in range(table.ranks[f])])
        return t.add_node(rng.choice(unary), [below])

    def biggest(pool: list[int], limit: int) -> int | None:
        fit = [x for x in pool if sizes[x] <= limit]
        if not fit:
            return None
        fit.sort(key=lambda x: sizes[x])
        return fit[-1] if rng.random() < 0.75 else rng.choice(fit[-3:])

    t_nts.append(add(0, lambda t: handle(t, t.add_node(rng.choice(consts)))))
    u_nts.append(add(1, lambda t: handle(t, handle(t, t.add_node(-1)))))
    # doubling up to n costs about 2 log2 n; the rest goes into mixing rules
    growth = 2 * max(1, n.bit_length()) + 6
    mix_until = max(total, g - growth)

    while total + 2 * r + 4 <= mix_until:
        u, c = u_nts[-1], t_nts[-1]
        room = n - sizes[c]
        if rng.random() < 0.6 and 2 * sizes[u] + 4 * r <= room:
            u_nts.append(add(1, lambda t: handle(t, t.add_node(u, [handle(t, t.add_node(-1))]))))
        elif sizes[u] + 2 * r <= room:
            t_nts.append(add(0, lambda t: t.add_node(u, [handle(t, t.add_node(c))])))
        else:
            break

    while g - total >= 4:
        c = t_nts[-1]
        room = n - sizes[c]
        a = u_nts[-1]
        b = biggest(u_nts, room - sizes[a])
        if b is not None and rng.random() < 0.85:
            u_nts.append(add(1, lambda t: t.add_node(a, [t.add_node(b, [t.add_node(-1)])])))
            continue
        a = biggest(u_nts, room)
        if a is None:
            break
        t_nts.append(add(0, lambda t: t.add_node(a, [t.add_node(c)])))
    c = t_nts[-1]
    a = biggest(u_nts, n - sizes[c])
    if a is not None and total + 2 <= g:
        start = add(0, lambda t: t.add_node(a, [t.add_node(c)]))
    else:
        start = c
    return _finish_start(SlcfGrammar(table, prods), start)


def _finish_start(g: SlcfGrammar, start: int) -> SlcfGrammar:
    return with_start(g, start)


def grammar_expansion(g: SlcfGrammar) -> int:
    return expansion_sizes(g)[g.start]
