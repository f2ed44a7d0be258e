"""Replay compression steps on a handle grammar next to the compressed tree.

A :class:`TrackedPair` holds a handle grammar ``G`` and the tree ``T`` the
compressor currently works on, with ``eval(G) == T``.  Before each
compression step the grammar is changed so that no occurrence of a pattern
the step compresses crosses a nonterminal boundary:

* :meth:`TrackedPair.rem_cr_chains` before chain compression,
* :meth:`TrackedPair.pop` before (up, down) pair compression,
* :meth:`TrackedPair.gen_pop` before leaf compression.

Then the same step is applied to every right-hand side, using the fresh
letters the compressor recorded, and ``eval(G)`` is compared with the new
tree.  The invariants GR1-GR5 are checked after every step, and the number
of letters each uncrossing call inserts is counted (two units per letter).

Right-hand sides are kept as small mutable node trees; nonterminal
occurrences are indexed so that "replace every occurrence of A" touches
only those occurrences.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .compressor import Compressor, StepTrace
from .grammar import Production, SlcfGrammar, expand_preorder
from .normalizer import _is_arm, handle_violation
from .tree import RankedTree, SymbolTable

N0, N1, N0_NEW = "N0", "N1", "N0~"


class SimulationError(AssertionError):
    """The grammar and the tree went out of sync or an invariant broke."""


class _Node:
    __slots__ = ("label", "kids", "parent", "owner")

    def __init__(self, label: int, kids: list[_Node] | None = None):
        self.label = label
        self.kids = kids if kids is not None else []
        self.parent: _Node | None = None
        self.owner = -1  # lhs of the rule whose root this is

    def __repr__(self) -> str:
        return f"_Node({self.label})"


@dataclass
class CallRecord:
    """Letters inserted by one uncrossing call and the bound they must meet."""

    kind: str
    phase: int
    letters: int
    credit: int
    bound: int | None
    g0: int
    g1: int
    g0_new: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Counters:
    n0: int = 0
    n1: int = 0
    g0: int = 0
    g1: int = 0
    g0_new: int = 0
    released: int = 0
    calls: list[CallRecord] = field(default_factory=list)


class TrackedPair:
    """A handle grammar kept equal to the compressor's tree.

    ``strict`` turns on the GR1-GR5 checks; switch it off for grammars that
    are not handle grammars to begin with, such as ``S -> T``.
    """

    def __init__(self, grammar: SlcfGrammar, tree: RankedTree | None = None, strict: bool = True):
        self.table: SymbolTable = grammar.table
        self.strict = strict
        self.order: list[int] = []
        self.root: dict[int, _Node] = {}
        self.param: dict[int, _Node] = {}
        self.kind: dict[int, str] = {}
        self.occ: dict[int, set[_Node]] = {}
        self.phase = 0
        ranks = self.table.ranks
        for p in grammar.productions:
            self.order.append(p.lhs)
            self.kind[p.lhs] = N1 if ranks[p.lhs] == 1 else N0
            self.occ[p.lhs] = set()
        for p in grammar.productions:
            self._load(p)
        letters = [v.label for v in self._all_nodes() if v.label >= 0 and v.label not in self.root]
        if tree is not None:
            letters.extend(tree.labels)
        self.r = max((ranks[x] for x in letters), default=0)
        self.counters = Counters()
        self.counters.g0, self.counters.g1, self.counters.g0_new = self._occurrence_counts()
        self.counters.n0 = self.counters.g0
        self.counters.n1 = self.counters.g1
        self.n0_count = sum(1 for a in self.order if self.kind[a] == N0)
        self.n1_count = sum(1 for a in self.order if self.kind[a] == N1)
        if tree is None:
            tree = self._eval_tree()
        self.tree = tree
        self.check_sync(tree, "initial grammar")
        if strict:
            self.check_invariants("initial grammar")

    # -- building blocks --------------------------------------------------------

    def _load(self, p: Production) -> None:
        rhs = p.rhs
        nodes: dict[int, _Node] = {}
        for v in rhs.postorder():
            node = _Node(rhs.labels[v], [nodes[c] for c in rhs.children[v]])
            for c in node.kids:
                c.parent = node
            nodes[v] = node
            if node.label >= 0 and node.label in self.occ:
                self.occ[node.label].add(node)
            elif node.label == -1:
                self.param[p.lhs] = node
        top = nodes[rhs.root]
        top.owner = p.lhs
        self.root[p.lhs] = top

    def _is_nt(self, label: int) -> bool:
        return label in self.root

    def _walk(self, top: _Node) -> list[_Node]:
        out, stack = [], [top]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(v.kids))
        return out

    def _all_nodes(self) -> list[_Node]:
        out: list[_Node] = []
        for a in self.order:
            out.extend(self._walk(self.root[a]))
        return out

    def _replace(self, old: _Node, new: _Node) -> None:
        """Put ``new`` where ``old`` hangs."""
        p = old.parent
        new.parent = p
        if p is None:
            new.owner = old.owner
            self.root[old.owner] = new
        else:
            kids = p.kids
            for j, c in enumerate(kids):
                if c is old:
                    kids[j] = new
                    break

    def _chain(self, letters: list[int]) -> tuple[_Node, _Node]:
        top = bottom = _Node(letters[0])
        for x in letters[1:]:
            n = _Node(x)
            bottom.kids = [n]
            n.parent = bottom
            bottom = n
        return top, bottom

    def _remove_rule(self, a: int) -> None:
        self.order.remove(a)
        del self.root[a]
        self.param.pop(a, None)
        self.occ.pop(a, None)
        self.kind.pop(a, None)

    def _insert_rule(self, lhs: int, top: _Node, before: int, kind: str) -> None:
        self.order.insert(self.order.index(before), lhs)
        top.parent = None
        top.owner = lhs
        self.root[lhs] = top
        self.kind[lhs] = kind
        self.occ[lhs] = set()

    def _occurrence_counts(self) -> tuple[int, int, int]:
        c = {N0: 0, N1: 0, N0_NEW: 0}
        for a, nodes in self.occ.items():
            c[self.kind[a]] += len(nodes)
        return c[N0], c[N1], c[N0_NEW]

    # -- views ------------------------------------------------------------------

    def grammar(self) -> SlcfGrammar:
        prods = []
        for a in self.order:
            t = RankedTree(self.table)
            index: dict[int, int] = {}
            for v in self._walk(self.root[a]):
                index[id(v)] = len(t.labels)
                t.labels.append(v.label)
                t.children.append([])
                t.parent.append(-1)
            for v in self._walk(self.root[a]):
                i = index[id(v)]
                t.children[i] = [index[id(c)] for c in v.kids]
                for c in t.children[i]:
                    t.parent[c] = i
            t.root = 0
            t.size = len(t.labels)
            prods.append(Production(a, t))
        return SlcfGrammar(self.table, prods)

    def _eval_tree(self) -> RankedTree:
        from .grammar import tree_from_preorder

        return tree_from_preorder(self.table, expand_preorder(self.grammar()))

    def first_letter(self, a: int) -> int | None:
        v = self.root[a]
        while v.label >= 0 and v.label in self.root:
            v = self.root[v.label]
        return v.label if v.label >= 0 else None

    def last_letter(self, a: int) -> int | None:
        v = self.param[a].parent
        while v is not None and v.label in self.root:
            v = self.param[v.label].parent
        return None if v is None else v.label

    # -- replacing occurrences --------------------------------------------------

    def _occurrences(self, a: int) -> list[_Node]:
        return list(self.occ.get(a, ()))

    def _replace_by_letters(self, a: int, letters: list[int]) -> int:
        """Every occurrence of rank-1 ``a`` becomes the chain ``letters``."""
        occs = self._occurrences(a)
        for o in occs:
            o.label = letters[0]
            if len(letters) > 1:
                below = o.kids[0]
                top, bottom = self._chain(letters[1:])
                o.kids = [top]
                top.parent = o
                bottom.kids = [below]
                below.parent = bottom
        self._remove_rule(a)
        return len(occs) * len(letters)

    def _pop_up(self, a: int, count: int) -> int:
        """Move the top ``count`` unary letters of ``a``'s rule above each occurrence."""
        v = self.root[a]
        letters = []
        for _ in range(count):
            letters.append(v.label)
            v = v.kids[0]
        v.parent = None
        v.owner = a
        self.root[a] = v
        occs = self._occurrences(a)
        for o in occs:
            top, bottom = self._chain(letters)
            self._replace(o, top)
            bottom.kids = [o]
            o.parent = bottom
        return len(occs) * count

    def _pop_down(self, a: int, count: int) -> int:
        """Move the bottom ``count`` unary letters of ``a``'s rule below each occurrence."""
        y = self.param[a]
        v = y.parent
        letters = []
        for _ in range(count):
            letters.append(v.label)
            top = v
            v = v.parent
        letters.reverse()
        self._replace(top, y)
        occs = self._occurrences(a)
        for o in occs:
            below = o.kids[0]
            t, b = self._chain(letters)
            o.kids = [t]
            t.parent = o
            b.kids = [below]
            below.parent = b
        return len(occs) * count

    def _is_only_letters(self, a: int, count: int) -> bool:
        """Is the rank-1 rule of ``a`` exactly its top ``count`` letters?"""
        v = self.root[a]
        for _ in range(count):
            v = v.kids[0]
        return v.label < 0

    # -- Pop ------------------------------------------------------------------

    def pop(self, up: set[int], down: set[int]) -> CallRecord:
        """Uncross every pattern ``ab`` with ``a`` in ``up`` and ``b`` in ``down``."""
        if up & down:
            raise ValueError("up and down must be disjoint")
        rec = self._start_call("pop")
        ranks = self.table.ranks
        inserted = 0
        for a in list(self.order[:-1]):
            if a not in self.root:
                continue
            first = self.root[a].label
            if first >= 0 and first not in self.root and first in down and ranks[first] == 1:
                if ranks[a] == 1 and self._is_only_letters(a, 1):
                    inserted += self._replace_by_letters(a, [first])
                    continue
                inserted += self._pop_up(a, 1)
            if ranks[a] == 1:
                last = self.param[a].parent.label
                if last not in self.root and last in up and ranks[last] == 1:
                    if self.root[a].kids and self.root[a].kids[0] is self.param[a]:
                        inserted += self._replace_by_letters(a, [last])
                        continue
                    inserted += self._pop_down(a, 1)
        rec.letters = inserted
        rec.credit = 2 * inserted
        rec.bound = 4 * rec.g1 + 2 * rec.g0 + 2 * rec.g0_new
        return rec

    # -- RemCrChains --------------------------------------------------------------

    def rem_cr_chains(self) -> CallRecord:
        """Pop whole letter prefixes and suffixes so no chain crosses a nonterminal."""
        rec = self._start_call("rem_cr_chains")
        ranks = self.table.ranks
        inserted = 0
        for a in list(self.order[:-1]):
            if a not in self.root:
                continue
            x = self.first_letter(a)
            if x is not None and ranks[x] == 1:
                p = 0
                v = self.root[a]
                while v.label == x:
                    p += 1
                    v = v.kids[0]
                if p == 0:
                    raise SimulationError(f"{self._name(a)}: first letter is not explicit at its turn")
                if v.label < 0:
                    inserted += self._replace_by_letters(a, [x] * p)
                    continue
                inserted += self._pop_up(a, p)
                if self.strict and self.first_letter(a) == x:
                    raise SimulationError(f"{self._name(a)}: prefix of {self._name(x)} longer than popped")
            if ranks[a] == 1:
                x = self.last_letter(a)
                if x is not None and ranks[x] == 1:
                    s = 0
                    v = self.param[a].parent
                    while v is not None and v.label == x:
                        s += 1
                        v = v.parent
                    if s == 0:
                        raise SimulationError(f"{self._name(a)}: last letter is not explicit at its turn")
                    if v is None:
                        inserted += self._replace_by_letters(a, [x] * s)
                        continue
                    inserted += self._pop_down(a, s)
        rec.letters = inserted
        rec.credit = 2 * inserted
        return rec

    # -- GenPop ---------------------------------------------------------------------

    def gen_pop(self) -> CallRecord:
        """Uncross every parent-leaf pair, popping constants up and handles down."""
        rec = self._start_call("gen_pop")
        ranks = self.table.ranks
        inserted = 0
        body = self.order[:-1]
        for a in list(body):
            v = self.root[a]
            if ranks[a] == 0 and not v.kids and v.label not in self.root:
                occs = self._occurrences(a)
                for o in occs:
                    o.label = v.label
                inserted += len(occs)
                self._remove_rule(a)
        marked: set[int] = set()
        for a in reversed(self.order[:-1]):
            if ranks[a] != 1:
                continue
            for o in self.occ[a]:
                c = o.kids[0]
                if c.label >= 0 and c.label not in self.root and ranks[c.label] == 0:
                    marked.add(a)
                    break
            if a in marked:
                last = self.param[a].parent
                if last is not None and last.label in self.root:
                    marked.add(last.label)
        for a in list(self.order[:-1]):
            if a in marked:
                inserted += self._pop_handle(a)
        rec.letters = inserted
        rec.credit = 2 * inserted
        rec.bound = 2 * rec.g1 * self.r + 2 * rec.g0 + 2 * rec.g0_new
        return rec

    def _pop_handle(self, a: int) -> int:
        ranks = self.table.ranks
        y = self.param[a]
        h = y.parent
        if h is None or h.label in self.root:
            raise SimulationError(f"{self._name(a)} is marked but its rule does not end with a handle")
        f = h.label
        hole = next(j for j, c in enumerate(h.kids) if c is y)
        gammas: list[int | None] = []
        for j, t in enumerate(h.kids):
            if j == hole:
                gammas.append(None)
            elif not t.kids and t.label not in self.root and ranks[t.label] == 0:
                gammas.append(t.label)
            else:
                x = self.table.fresh("nonterminal", 0)
                self._insert_rule(x, t, a, N0_NEW)
                gammas.append(x)
        emptied = h.parent is None
        if not emptied:
            self._replace(h, y)
        inserted = 0
        occs = self._occurrences(a)
        for o in occs:
            below = o.kids[0]
            kids = []
            for g in gammas:
                if g is None:
                    kids.append(below)
                    continue
                leaf = _Node(g)
                if g in self.root:
                    self.occ[g].add(leaf)
                else:
                    inserted += 1
                kids.append(leaf)
            node = _Node(f, kids)
            for c in kids:
                c.parent = node
            inserted += 1
            if emptied:
                # the rule was this handle alone: splice the nonterminal out
                self._replace(o, node)
            else:
                o.kids = [node]
                node.parent = o
        if emptied:
            self._remove_rule(a)
        return inserted

    # -- compression on right-hand sides --------------------------------------------

    def _letter_nodes(self) -> list[_Node]:
        return [v for v in self._all_nodes() if v.label >= 0 and v.label not in self.root]

    def compress_chains(self, keys: dict[tuple[int, ...], int]) -> int:
        ranks = self.table.ranks
        runs = []
        for v in self._letter_nodes():
            a = v.label
            if ranks[a] != 1:
                continue
            p = v.parent
            if p is not None and p.label == a:
                continue
            ell = 1
            u = v.kids[0]
            while u.label == a:
                ell += 1
                u = u.kids[0]
            if ell >= 2:
                runs.append((v, ell, u))
        removed = 0
        for v, ell, u in runs:
            key = (v.label, ell)
            if key not in keys:
                raise SimulationError(f"chain {self._name(v.label)}^{ell} in the grammar was not compressed in the tree")
            v.label = keys[key]
            v.kids = [u]
            u.parent = v
            removed += ell
        return removed

    def compress_pairs(self, up: set[int], down: set[int], keys: dict[tuple[int, ...], int]) -> int:
        removed = 0
        for v in self._letter_nodes():
            if v.label not in up:
                continue
            c = v.kids[0]
            if c.label in down and c.label not in self.root:
                key = (v.label, c.label)
                if key not in keys:
                    raise SimulationError(f"pair {self._name(key[0])}{self._name(key[1])} has no fresh letter")
                v.label = keys[key]
                v.kids = c.kids
                for x in v.kids:
                    x.parent = v
                removed += 2
        return removed

    def compress_leaves(self, keys: dict[tuple[int, ...], int]) -> int:
        ranks = self.table.ranks
        records = []
        for v in self._letter_nodes():
            if ranks[v.label] == 0:
                continue
            key = [v.label]
            for i, c in enumerate(v.kids, 1):
                if c.label >= 0 and c.label not in self.root and ranks[c.label] == 0:
                    key.extend((i, c.label))
            if len(key) > 1:
                records.append((v, tuple(key)))
        removed = 0
        for v, key in records:
            if key not in keys:
                raise SimulationError(f"leaf record {self._key_name(key)} has no fresh letter")
            drop = set(key[1::2])
            v.kids = [c for i, c in enumerate(v.kids, 1) if i not in drop]
            v.label = keys[key]
            removed += len(drop) + 1
        return removed

    # -- steps ------------------------------------------------------------------

    def _start_call(self, kind: str) -> CallRecord:
        g0, g1, g0n = self._occurrence_counts()
        rec = CallRecord(kind, self.phase, 0, 0, None, g0, g1, g0n)
        self.counters.calls.append(rec)
        return rec

    def step(self, trace: StepTrace, after: RankedTree) -> None:
        """Uncross, compress as the compressor did, and check sync and invariants."""
        where = f"phase {trace.phase} {trace.kind}"
        self.phase = trace.phase
        if trace.kind == "chain":
            self.rem_cr_chains()
        elif trace.kind == "pair":
            rec = self.pop(set(trace.up), set(trace.down))
            self._check_bound(rec, where)
        elif trace.kind == "leaf":
            rec = self.gen_pop()
            self._check_bound(rec, where)
        else:
            raise ValueError(f"unknown step kind {trace.kind!r}")
        self.check_sync(self.tree, where + " (after uncrossing)")
        if self.strict:
            self.check_invariants(where + " (after uncrossing)")
        if trace.kind == "chain":
            removed = self.compress_chains(trace.keys)
        elif trace.kind == "pair":
            removed = self.compress_pairs(set(trace.up), set(trace.down), trace.keys)
        else:
            removed = self.compress_leaves(trace.keys)
        self.counters.released += 2 * removed
        self.tree = after
        self.check_sync(after, where)
        if self.strict:
            self.check_invariants(where)

    def _check_bound(self, rec: CallRecord, where: str) -> None:
        if self.strict and rec.bound is not None and rec.credit > rec.bound:
            raise SimulationError(f"{where}: {rec.kind} issued {rec.credit} > bound {rec.bound}")

    def check_sync(self, tree: RankedTree | None = None, where: str = "") -> None:
        """Raise :class:`SimulationError` unless ``eval(G)`` equals ``tree`` (default: the tracked tree)."""
        if tree is None:
            tree = self.tree
        got = expand_preorder(self.grammar())
        want = [tree.labels[v] for v in tree.preorder()]
        if got != want:
            i = next((j for j, (x, y) in enumerate(zip(got, want)) if x != y), min(len(got), len(want)))
            raise SimulationError(
                f"{where}: eval(G) differs from the tree at preorder position {i} "
                f"(sizes {len(got)} and {len(want)})"
            )

    def check_invariants(self, where: str = "") -> None:
        g = self.grammar()
        msg = handle_violation(g)
        if msg is not None:
            raise SimulationError(f"{where}: GR1 {msg}")
        g0, g1, g0n = self._occurrence_counts()
        c = self.counters
        if g0 > c.g0 or g1 > c.g1:
            raise SimulationError(f"{where}: GR3 occurrences grew (g0 {c.g0}->{g0}, g1 {c.g1}->{g1})")
        if sum(1 for a in self.order if self.kind[a] == N0) > self.n0_count:
            raise SimulationError(f"{where}: GR2 more N0 nonterminals than at the start")
        if sum(1 for a in self.order if self.kind[a] == N1) > self.n1_count:
            raise SimulationError(f"{where}: GR2 more N1 nonterminals than at the start")
        if g0n > c.n1 * max(0, self.r - 1):
            raise SimulationError(f"{where}: GR4 {g0n} new rank-0 occurrences > {c.n1 * max(0, self.r - 1)}")
        idx = g.index()
        for p in g.productions:
            if self.kind[p.lhs] == N0_NEW and not _is_arm(p.rhs, p.rhs.root, idx):
                raise SimulationError(f"{where}: GR5 rule of {self._name(p.lhs)} is not a chain ending in a leaf")
        c.g0, c.g1, c.g0_new = g0, g1, g0n

    # -- naming -----------------------------------------------------------------

    def _name(self, sid: int) -> str:
        return self.table.names[sid]

    def _key_name(self, key: tuple[int, ...]) -> str:
        parts = [self._name(key[0])]
        for i in range(1, len(key), 2):
            parts.append(f"{key[i]}:{self._name(key[i + 1])}")
        return "(" + ",".join(parts) + ")"


def simulate_phase(tp: TrackedPair, steps: list[StepTrace]) -> TrackedPair:
    """Replay the recorded steps of one phase; each step needs its ``tree`` snapshot."""
    for st in steps:
        if st.tree is None:
            raise ValueError("step traces need tree snapshots for replay")
        tp.step(st, st.tree)
    return tp


def simulate(
    grammar: SlcfGrammar, phases: int = 3, strict: bool = True
) -> tuple[TrackedPair, Compressor]:
    """Compress ``eval(grammar)`` for up to ``phases`` phases, replaying each step."""
    tp = TrackedPair(grammar, None, strict)
    comp = Compressor(tp.tree, snapshots=True)
    done = 0
    while comp.size > 1 and done < phases:
        start = len(comp.steps)
        comp.run_phase()
        simulate_phase(tp, comp.steps[start:])
        done += 1
    return tp, comp


# ---------------------------------------------------------------------------
# phase traces as JSON lines


def _symbol_slots(kind: str, key: tuple[int, ...]) -> list[bool]:
    if kind == "chain":
        return [True, False]
    if kind == "pair":
        return [True, True]
    return [i % 2 == 0 for i in range(len(key))]


def step_to_json(step: StepTrace, table: SymbolTable) -> dict:
    """Trace record with symbols written by name, so it can cross processes."""
    names, ranks = table.names, table.ranks
    keys = []
    for key, letter in step.keys.items():
        slots = _symbol_slots(step.kind, key)
        keys.append(
            {
                "key": [names[x] if s else x for x, s in zip(key, slots)],
                "letter": names[letter],
                "rank": ranks[letter],
            }
        )
    return {
        "phase": step.phase,
        "kind": step.kind,
        "up": [names[x] for x in step.up],
        "down": [names[x] for x in step.down],
        "keys": keys,
    }


def step_from_json(obj: dict, table: SymbolTable) -> StepTrace:
    """Inverse of :func:`step_to_json`; unknown fresh letters are added to ``table``."""
    kind = obj["kind"]
    if kind not in ("chain", "pair", "leaf"):
        raise ValueError(f"unknown step kind {kind!r}")

    def sym(name: str) -> int:
        sid = table.lookup(name)
        if sid is None:
            raise ValueError(f"trace names unknown symbol {name!r}")
        return sid

    keys: dict[tuple[int, ...], int] = {}
    for rec in obj["keys"]:
        raw = rec["key"]
        slots = _symbol_slots(kind, tuple(raw))
        key = tuple(sym(x) if s else int(x) for x, s in zip(raw, slots))
        letter = table.lookup(rec["letter"])
        if letter is None:
            letter = table.add(rec["letter"], int(rec["rank"]), kind)
        keys[key] = letter
    return StepTrace(
        int(obj["phase"]), kind, keys, [sym(x) for x in obj.get("up", [])], [sym(x) for x in obj.get("down", [])]
    )


def replay(grammar: SlcfGrammar, steps: list[StepTrace], strict: bool = True) -> TrackedPair:
    """Replay steps that carry no tree snapshots.

    The expected tree after each step comes from applying the same step to
    the one-rule grammar of the current tree, where nothing can cross.
    """
    from .grammar import trivial_grammar

    tp = TrackedPair(grammar, None, strict)
    flat = TrackedPair(trivial_grammar(tp.tree), tp.tree, strict=False)
    for st in steps:
        if st.kind == "chain":
            flat.compress_chains(st.keys)
        elif st.kind == "pair":
            flat.compress_pairs(set(st.up), set(st.down), st.keys)
        else:
            flat.compress_leaves(st.keys)
        tp.step(st, flat._eval_tree())
    return tp
