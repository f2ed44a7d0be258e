"""TtoG: compress a ranked tree into an SLCF grammar by recompression.

Each phase runs chain compression, unary pair compression and leaf
compression on the tree.  Every fresh letter introduced on the tree gets a
production, so the productions together with ``S -> last letter`` form a
grammar for the input.

The working tree does not store symbol ids directly.  It stores codes that
form a contiguous interval after each renaming pass; ``alias`` maps a code
back to the stable symbol id used in productions.  This is what lets the
sorting steps use buckets of size proportional to the current tree.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

from .grammar import Production, SlcfGrammar, chain_rhs
from .radix import SortStats, radix_order_fixed, radix_order_varlen
from .tree import RankedTree, SymbolTable

UP, DOWN = 1, 2


@dataclass
class Partition:
    """Disjoint unary letter sets, in stable symbol ids."""

    up: set[int]
    down: set[int]
    pair_occurrences: dict[tuple[int, int], list[int]]
    covered: int = 0
    two_chains: int = 0
    unary_nodes: int = 0
    maximal_chains: int = 0
    # same groups in working codes, consumed by unary_pair_compress
    _groups: list[tuple[int, int, list[int]]] = field(default_factory=list, repr=False)


@dataclass
class StepTrace:
    """What one compression step did, in stable symbol ids.

    ``keys`` maps the identifying key of every fresh letter to the letter:
    ``(a, l)`` for chains, ``(a, b)`` for pairs and ``(f, i1, a1, ...)`` for
    leaves.
    """

    phase: int
    kind: str
    keys: dict[tuple[int, ...], int]
    up: list[int] = field(default_factory=list)
    down: list[int] = field(default_factory=list)
    tree: RankedTree | None = None


@dataclass
class PhaseStats:
    phase: int
    size_before: int = 0
    size_after_chain: int = 0
    size_after_pair: int = 0
    size_after_leaf: int = 0
    n0: int = 0
    n1: int = 0
    n_ge2: int = 0
    maximal_chains: int = 0
    unary_nodes_before_pair: int = 0
    two_chains: int = 0
    covered: int = 0
    fresh_chain: int = 0
    fresh_pair: int = 0
    fresh_leaf: int = 0
    cost_chain: int = 0
    cost_pair: int = 0
    cost_leaf: int = 0
    touches: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# chain lengths


def chain_cost_bound(lengths: list[int]) -> int:
    """Exact upper bound on the cost of :func:`represent_chain_lengths`.

    Power ladder ``2*floor(log L)``, one binary expansion of at most
    ``floor(log d)+1`` letters per gap ``d`` and two nodes per splice.
    """
    gaps = [b - a for a, b in zip([0] + lengths[:-1], lengths)]
    ladder = 2 * (max(gaps).bit_length() - 1)
    expansions = sum(d.bit_length() for d in gaps)
    return ladder + expansions + 2 * len(lengths)


C_REP = 3


def chain_cost_budget(lengths: list[int]) -> int:
    """``C_REP * (k + sum ceil(log2 max(2, gap)))``; dominates :func:`chain_cost_bound`."""
    gaps = [b - a for a, b in zip([0] + lengths[:-1], lengths)]
    return C_REP * (len(lengths) + sum((max(2, d) - 1).bit_length() for d in gaps))


def represent_chain_lengths(
    table: SymbolTable, a: int, lengths: list[int]
) -> tuple[dict[int, int], list[Production], int]:
    """Productions defining letters for ``a^l`` for every ``l`` in ``lengths``.

    Builds the ladder ``a_{2^i} -> a_{2^{i-1}} a_{2^{i-1}}``, one letter per
    gap between consecutive lengths from its binary expansion, and splices
    ``a_{l_i} -> a_{l_i - l_{i-1}} a_{l_{i-1}}``.  Letters that already denote
    the needed power are reused instead of adding unit rules.

    Returns the letter for each length, the productions in dependency order
    and their total size.
    """
    if not lengths:
        return {}, [], 0
    for x, y in zip(lengths, lengths[1:]):
        if y <= x:
            raise ValueError("lengths must be strictly increasing")
    if lengths[0] < 2:
        raise ValueError("chain lengths must be at least 2")
    wanted = set(lengths)
    gaps = [b - x for x, b in zip([0] + lengths[:-1], lengths)]
    letter: dict[int, int] = {1: a}
    prods: list[Production] = []
    cost = 0

    def emit(power: int, parts: list[int]) -> int:
        nonlocal cost
        x = table.fresh("chain" if power in wanted else "power-block", 1)
        prods.append(Production(x, chain_rhs(table, parts)))
        cost += len(parts)
        letter[power] = x
        return x

    top = max(gaps).bit_length() - 1
    for i in range(1, top + 1):
        half = letter[1 << (i - 1)]
        emit(1 << i, [half, half])
    for d in gaps:
        if d in letter:
            continue
        parts = [letter[1 << j] for j in range(d.bit_length() - 1, -1, -1) if d >> j & 1]
        emit(d, parts)
    prev = 0
    for ell, d in zip(lengths, gaps):
        if ell not in letter:
            emit(ell, [letter[d], letter[prev]])
        prev = ell
    return {ell: letter[ell] for ell in lengths}, prods, cost


# ---------------------------------------------------------------------------
# Greedy2Chains


def _greedy_sides(
    pa: list[int], pb: list[int], letters: list[int], k: int, stats: SortStats | None
) -> tuple[list[int], list[tuple[int, int, list[int]]], int, int]:
    """Assign every letter to up or down so many pairs ab get a up, b down.

    ``pa[i] pb[i]`` is the i-th two-letter occurrence, letters are in
    ``[0, k)`` and ``letters`` lists the letters to assign in the order they
    are considered.  Returns the side of each letter, the occurrence indices
    grouped by pair in sorted order, and the up-down and down-up counts after
    the final swap.
    """
    m = len(pa)
    side = [0] * k
    if m == 0:
        for x in letters:
            side[x] = UP
        return side, [], 0, 0
    order_ab = radix_order_fixed([(pa[i] + 1, pb[i] + 1) for i in range(m)], k, stats, check=False)
    order_ba = radix_order_fixed([(pb[i] + 1, pa[i] + 1) for i in range(m)], k, stats, check=False)

    groups: list[tuple[int, int, list[int]]] = []
    right: dict[int, list[tuple[int, int]]] = {}
    for i in order_ab:
        a, b = pa[i], pb[i]
        if groups and groups[-1][0] == a and groups[-1][1] == b:
            groups[-1][2].append(i)
        else:
            groups.append((a, b, [i]))
    for a, b, occ in groups:
        right.setdefault(a, []).append((b, len(occ)))
    left: dict[int, list[tuple[int, int]]] = {}
    last_key = None
    for i in order_ba:
        key = (pb[i], pa[i])
        if key == last_key:
            lst = left[key[0]]
            lst[-1] = (lst[-1][0], lst[-1][1] + 1)
        else:
            left.setdefault(key[0], []).append((key[1], 1))
            last_key = key

    count_up = [0] * k
    count_down = [0] * k
    for x in letters:
        if count_down[x] >= count_up[x]:
            side[x] = UP
            counter = count_up
        else:
            side[x] = DOWN
            counter = count_down
        for b, n in right.get(x, ()):
            counter[b] += n
        for b, n in left.get(x, ()):
            counter[b] += n
    up_down = down_up = 0
    for a, b, occ in groups:
        if side[a] == UP and side[b] == DOWN:
            up_down += len(occ)
        elif side[a] == DOWN and side[b] == UP:
            down_up += len(occ)
    if down_up > up_down:
        for x in letters:
            side[x] = UP if side[x] == DOWN else DOWN
        up_down, down_up = down_up, up_down
    return side, groups, up_down, down_up


def greedy_two_chains(words: list[list[int]]) -> tuple[set[int], set[int], int, int]:
    """Greedy2Chains on explicit words over non-negative int letters.

    Letters are considered in ascending order.  Returns ``up``, ``down``,
    the number of covered two-letter occurrences and the total number of
    two-letter occurrences.
    """
    pa: list[int] = []
    pb: list[int] = []
    present: set[int] = set()
    for w in words:
        present.update(w)
        for x, y in zip(w, w[1:]):
            if x == y:
                raise ValueError("words must not contain two equal adjacent letters")
            pa.append(x)
            pb.append(y)
    k = max(present) + 1 if present else 1
    side, _, covered, _ = _greedy_sides(pa, pb, sorted(present), k, None)
    up = {x for x in present if side[x] == UP}
    down = {x for x in present if side[x] == DOWN}
    return up, down, covered, len(pa)


# ---------------------------------------------------------------------------
# the compressor


class Compressor:
    """Mutable compression state for one input tree.

    The public step methods mirror the phase structure; :meth:`run_phase`
    calls them in order.  ``on_step`` is called with a :class:`StepTrace`
    after each compression step when tracing is enabled.
    """

    def __init__(
        self,
        tree: RankedTree,
        trace: bool = False,
        snapshots: bool = False,
        on_step: Callable[[StepTrace], None] | None = None,
    ):
        self.table = tree.table
        work = tree.compact()
        self.lab = work.labels
        self.kids = work.children
        self.par = work.parent
        self.root = work.root
        self.size = work.size
        # the input symbol ids already form the interval [0, len(table))
        self.base = 0
        self.alias: list[int] = list(range(len(self.table)))
        self.crank: list[int] = list(self.table.ranks)
        self.productions: list[Production] = []
        self.phase = 0
        self.touches = 0
        self.sort_stats = SortStats()
        self.max_rank = max((self.table.ranks[x] for x in set(work.labels)), default=0)
        self.trace = trace or snapshots or on_step is not None
        self.snapshots = snapshots
        self.on_step = on_step
        self.steps: list[StepTrace] = []
        self.stats: list[PhaseStats] = []
        self._order: list[int] | None = None

    # -- views ------------------------------------------------------------

    def tree(self) -> RankedTree:
        """The current tree with stable symbol ids, compacted."""
        t = RankedTree(self.table)
        order = self._preorder()
        index = {v: i for i, v in enumerate(order)}
        base, alias, lab, kids = self.base, self.alias, self.lab, self.kids
        t.labels = [alias[lab[v] - base] for v in order]
        t.children = [[index[c] for c in kids[v]] for v in order]
        t.parent = [-1] * len(order)
        for i, ch in enumerate(t.children):
            for c in ch:
                t.parent[c] = i
        t.root = 0
        t.size = len(order)
        return t

    def codes_in_use(self) -> list[int]:
        return sorted({self.lab[v] for v in self._preorder()})

    def _preorder(self) -> list[int]:
        kids = self.kids
        out: list[int] = []
        stack = [self.root]
        push, pop, extend = out.append, stack.pop, stack.extend
        while stack:
            v = pop()
            push(v)
            ch = kids[v]
            if ch:
                if len(ch) == 1:
                    stack.append(ch[0])
                else:
                    extend(reversed(ch))
        self.touches += len(out)
        return out

    def _fresh_code(self, sid: int) -> int:
        self.alias.append(sid)
        self.crank.append(self.table.ranks[sid])
        return self.base + len(self.alias) - 1

    def _record(self, kind: str, keys: dict, partition: Partition | None = None) -> None:
        if not self.trace:
            return
        step = StepTrace(self.phase, kind, keys)
        if partition is not None:
            step.up = sorted(partition.up)
            step.down = sorted(partition.down)
        if self.snapshots:
            step.tree = self.tree()
        self.steps.append(step)
        if self.on_step is not None:
            self.on_step(step)

    # -- renaming -----------------------------------------------------------

    def rename_letters_to_interval(self) -> dict[int, int]:
        """Give the letters in use fresh consecutive codes in first-traversal order.

        The new interval starts right after every code handed out so far.
        Returns the old-code to new-code mapping.
        """
        lab, kids, base = self.lab, self.kids, self.base
        flags = [-1] * len(self.alias)
        alias, crank = self.alias, self.crank
        new_alias: list[int] = []
        new_rank: list[int] = []
        new_base = base + len(alias)
        order: list[int] = []
        push = order.append
        stack = [self.root]
        pop, extend = stack.pop, stack.extend
        while stack:
            v = pop()
            push(v)
            c = lab[v] - base
            x = flags[c]
            if x < 0:
                x = flags[c] = len(new_alias)
                new_alias.append(alias[c])
                new_rank.append(crank[c])
            lab[v] = new_base + x
            ch = kids[v]
            if ch:
                if len(ch) == 1:
                    stack.append(ch[0])
                else:
                    extend(reversed(ch))
        self.touches += len(order)
        mapping = {base + c: new_base + x for c, x in enumerate(flags) if x >= 0}
        self.base, self.alias, self.crank = new_base, new_alias, new_rank
        self._order = order
        return mapping

    def _take_order(self) -> list[int]:
        order = self._order
        self._order = None
        return order if order is not None else self._preorder()

    # -- chains -------------------------------------------------------------

    def chain_compress(self) -> tuple[int, int]:
        """Replace every a-maximal chain a^l (l >= 2) by a letter for a^l.

        Returns (fresh letters on the tree, representation cost).
        """
        order = self._take_order()
        lab, kids, par, crank, base = self.lab, self.kids, self.par, self.crank, self.base
        keys: list[tuple[int, int]] = []
        where: list[tuple[int, int]] = []
        walked = 0
        for v in order:
            c = lab[v]
            if crank[c - base] != 1:
                continue
            p = par[v]
            if p >= 0 and lab[p] == c:
                continue
            u = kids[v][0]
            ell = 1
            while lab[u] == c:
                ell += 1
                u = kids[u][0]
            walked += ell
            if ell >= 2:
                keys.append((c - base + 1, ell))
                where.append((v, u))
        self.touches += walked + len(keys)
        if not keys:
            self._record("chain", {})
            return 0, 0
        k = max(len(self.alias), max(ell for _, ell in keys))
        order_idx = radix_order_fixed(keys, k, self.sort_stats, check=False)
        trace_keys: dict[tuple[int, ...], int] = {}
        fresh = 0
        cost = 0
        i = 0
        n = len(order_idx)
        while i < n:
            digit = keys[order_idx[i]][0]
            j = i
            lengths: list[int] = []
            while j < n and keys[order_idx[j]][0] == digit:
                ell = keys[order_idx[j]][1]
                if not lengths or lengths[-1] != ell:
                    lengths.append(ell)
                j += 1
            a = self.alias[digit - 1]
            letter_for, prods, c = represent_chain_lengths(self.table, a, lengths)
            self.productions.extend(prods)
            cost += c
            code_for: dict[int, int] = {}
            for ell in lengths:
                code_for[ell] = self._fresh_code(letter_for[ell])
                trace_keys[(a, ell)] = letter_for[ell]
                fresh += 1
            for t in range(i, j):
                r = order_idx[t]
                ell = keys[r][1]
                v, u = where[r]
                lab[v] = code_for[ell]
                kids[v] = [u]
                par[u] = v
                self.size -= ell - 1
            i = j
        self.touches += n
        self._record("chain", trace_keys)
        return fresh, cost

    # -- pairs ----------------------------------------------------------------

    def find_partition(self) -> Partition:
        order = self._take_order()
        lab, kids, crank, base = self.lab, self.kids, self.crank, self.base
        pa: list[int] = []
        pb: list[int] = []
        nodes: list[int] = []
        present = [False] * len(self.alias)
        unary = 0
        runs = 0
        prev_unary_child = -1  # child of the last unary node seen, if unary
        for v in order:
            c = lab[v] - base
            if crank[c] != 1:
                continue
            unary += 1
            present[c] = True
            if v != prev_unary_child:
                runs += 1
            u = kids[v][0]
            d = lab[u] - base
            if crank[d] == 1:
                pa.append(c)
                pb.append(d)
                nodes.append(v)
                prev_unary_child = u
            else:
                prev_unary_child = -1
        letters = [x for x in range(len(present)) if present[x]]
        self.touches += len(pa) + len(present)
        side, groups, covered, _ = _greedy_sides(pa, pb, letters, len(self.alias), self.sort_stats)
        alias = self.alias
        part = Partition(
            up={alias[x] for x in letters if side[x] == UP},
            down={alias[x] for x in letters if side[x] == DOWN},
            pair_occurrences={},
            covered=covered,
            two_chains=len(pa),
            unary_nodes=unary,
            maximal_chains=runs,
        )
        for a, b, occ in groups:
            if side[a] == UP and side[b] == DOWN:
                occ_nodes = [nodes[i] for i in occ]
                part.pair_occurrences[(alias[a], alias[b])] = occ_nodes
                part._groups.append((a, b, occ_nodes))
        return part

    def unary_pair_compress(self, part: Partition) -> tuple[int, int]:
        lab, kids, par = self.lab, self.kids, self.par
        trace_keys: dict[tuple[int, ...], int] = {}
        fresh = 0
        for a, b, occ in part._groups:
            sa, sb = self.alias[a], self.alias[b]
            sid = self.table.fresh("pair", 1)
            self.productions.append(Production(sid, chain_rhs(self.table, [sa, sb])))
            code = self._fresh_code(sid)
            trace_keys[(sa, sb)] = sid
            fresh += 1
            for v in occ:
                u = kids[v][0]
                w = kids[u][0]
                lab[v] = code
                kids[v] = [w]
                par[w] = v
            self.size -= len(occ)
            self.touches += len(occ)
        self._record("pair", trace_keys, part)
        return fresh, 2 * fresh

    # -- leaves ---------------------------------------------------------------

    def leaf_compress(self) -> tuple[int, int]:
        """Absorb the constant children of every node into a fresh letter.

        All records are collected before anything changes, so a child that
        only becomes a constant during this pass is left alone.
        """
        order = self._take_order()
        lab, kids, crank, base = self.lab, self.kids, self.crank, self.base
        keys: list[list[int]] = []
        nodes: list[int] = []
        scanned = 0
        is_const = [r == 0 for r in crank]
        for v in order:
            ch = kids[v]
            if not ch:
                continue
            scanned += len(ch)
            key = None
            i = 0
            for u in ch:
                i += 1
                d = lab[u] - base
                if is_const[d]:
                    if key is None:
                        key = [lab[v] - base + 1, i, d + 1]
                    else:
                        key.append(i)
                        key.append(d + 1)
            if key is not None:
                keys.append(key)
                nodes.append(v)
        self.touches += scanned + len(keys)
        if not keys:
            self._record("leaf", {})
            return 0, 0
        k = max(len(self.alias), self.max_rank)
        order_idx = radix_order_varlen(keys, k, self.sort_stats, check=False)
        alias, table = self.alias, self.table
        trace_keys: dict[tuple[int, ...], int] = {}
        fresh = 0
        cost = 0
        prev = None
        code = -1
        for r in order_idx:
            key = keys[r]
            if key != prev:
                prev = key
                f = alias[key[0] - 1]
                absorbed = (len(key) - 1) // 2
                rank = table.ranks[f] - absorbed
                sid = table.fresh("leaf", rank)
                stable_key = [f]
                for t in range(1, len(key), 2):
                    stable_key.append(key[t])
                    stable_key.append(alias[key[t + 1] - 1])
                self.productions.append(Production(sid, _leaf_rhs(table, stable_key)))
                code = self._fresh_code(sid)
                trace_keys[tuple(stable_key)] = sid
                fresh += 1
                cost += absorbed + 1
                drop = set(key[1::2])
            v = nodes[r]
            ch = kids[v]
            kids[v] = [u for i, u in enumerate(ch, 1) if i not in drop]
            lab[v] = code
            self.size -= len(drop)
        self.touches += len(order_idx)
        self._record("leaf", trace_keys)
        return fresh, cost

    # -- phases -------------------------------------------------------------

    def _counts(self, order: list[int]) -> tuple[int, int, int]:
        lab, crank, base = self.lab, self.crank, self.base
        hist = [0, 0, 0]
        for v in order:
            r = crank[lab[v] - base]
            hist[r if r < 2 else 2] += 1
        return hist[0], hist[1], hist[2]

    def run_phase(self) -> PhaseStats:
        self.phase += 1
        st = PhaseStats(self.phase, size_before=self.size)
        before = self.touches + self.sort_stats.bucket_touches
        self.rename_letters_to_interval()
        st.n0, st.n1, st.n_ge2 = self._counts(self._order or [])
        st.fresh_chain, st.cost_chain = self.chain_compress()
        st.size_after_chain = self.size
        self.rename_letters_to_interval()
        part = self.find_partition()
        st.maximal_chains = part.maximal_chains
        st.unary_nodes_before_pair = part.unary_nodes
        st.two_chains = part.two_chains
        st.covered = part.covered
        st.fresh_pair, st.cost_pair = self.unary_pair_compress(part)
        st.size_after_pair = self.size
        self.rename_letters_to_interval()
        st.fresh_leaf, st.cost_leaf = self.leaf_compress()
        st.size_after_leaf = self.size
        st.touches = self.touches + self.sort_stats.bucket_touches - before
        self.stats.append(st)
        return st

    def total_touches(self) -> int:
        return self.touches + self.sort_stats.bucket_touches

    def finish(self) -> SlcfGrammar:
        """Grammar for the input once the tree is a single node."""
        if self.size != 1:
            raise RuntimeError("finish() needs a single-node tree")
        last = self.alias[self.lab[self.root] - self.base]
        start = self.table.fresh("nonterminal", 0)
        rhs = RankedTree(self.table)
        rhs.root = rhs.add_node(last)
        return SlcfGrammar(self.table, self.productions + [Production(start, rhs)])


def _leaf_rhs(table: SymbolTable, key: list[int]) -> RankedTree:
    """``f(...)`` with the listed constants in place and parameters elsewhere."""
    f = key[0]
    k = table.ranks[f]
    const = dict(zip(key[1::2], key[2::2]))
    labels: list[int] = []
    param = 0
    for i in range(1, k + 1):
        if i in const:
            labels.append(const[i])
        else:
            param -= 1
            labels.append(param)
    labels.append(f)
    t = RankedTree(table)
    t.labels = labels
    t.children = [[] for _ in range(k)] + [list(range(k))]
    t.parent = [k] * k + [-1]
    t.root = k
    t.size = k + 1
    return t


def phase_bound(n: int) -> int:
    """Maximal number of phases for an input of ``n`` nodes."""
    if n <= 1:
        return 1
    return math.ceil(math.log(n) / math.log(4 / 3)) + 1


def ttog(
    tree: RankedTree,
    stats: list[PhaseStats] | None = None,
    on_step: Callable[[StepTrace], None] | None = None,
) -> SlcfGrammar:
    """Compress ``tree``; the result evaluates back to ``tree`` exactly."""
    comp = Compressor(tree, on_step=on_step)
    while comp.size > 1:
        st = comp.run_phase()
        if stats is not None:
            stats.append(st)
    return comp.finish()
