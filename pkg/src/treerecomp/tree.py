"""Ranked ordered labelled trees stored as an arena of nodes.

A tree is a set of parallel lists indexed by node id: ``labels``,
``children`` and ``parent``.  Node ids are never reused, so operations that
splice nodes out simply stop referring to them; the live part of the tree
is whatever is reachable from ``root``.

Negative labels are reserved for parameters: ``-i`` stands for ``y_i``.
They only appear in right-hand sides of grammar productions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

ORIGINS = ("input", "chain", "pair", "leaf", "power-block", "nonterminal")

_FRESH_PREFIX = {
    "input": "_in",
    "chain": "_chain",
    "pair": "_pair",
    "leaf": "_leaf",
    "power-block": "_pow",
    "nonterminal": "_N",
}

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class TermSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class RankConflictError(ValueError):
    pass


@dataclass(frozen=True)
class Symbol:
    id: int
    name: str
    rank: int
    origin: str


class SymbolTable:
    """Dense symbol ids with a name index.

    Ids are handed out consecutively and never change, so productions can
    refer to them across the whole run.
    """

    def __init__(self) -> None:
        self.names: list[str] = []
        self.ranks: list[int] = []
        self.origins: list[str] = []
        self._by_name: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def add(self, name: str, rank: int, origin: str = "input") -> int:
        if origin not in ORIGINS:
            raise ValueError(f"unknown symbol origin {origin!r}")
        if name in self._by_name:
            sid = self._by_name[name]
            if self.ranks[sid] != rank:
                raise RankConflictError(
                    f"symbol {name!r} used with ranks {self.ranks[sid]} and {rank}"
                )
            return sid
        sid = len(self.names)
        self.names.append(name)
        self.ranks.append(rank)
        self.origins.append(origin)
        self._by_name[name] = sid
        return sid

    def fresh(self, origin: str, rank: int) -> int:
        sid = len(self.names)
        name = f"{_FRESH_PREFIX[origin]}{sid}"
        while name in self._by_name:
            name += "_"
        return self.add(name, rank, origin)

    def rename(self, sid: int, name: str) -> None:
        if name in self._by_name:
            raise ValueError(f"symbol name {name!r} already taken")
        del self._by_name[self.names[sid]]
        self.names[sid] = name
        self._by_name[name] = sid

    def lookup(self, name: str) -> int | None:
        return self._by_name.get(name)

    def name(self, sid: int) -> str:
        return self.names[sid]

    def rank(self, sid: int) -> int:
        return self.ranks[sid]

    def origin(self, sid: int) -> str:
        return self.origins[sid]

    def symbol(self, sid: int) -> Symbol:
        return Symbol(sid, self.names[sid], self.ranks[sid], self.origins[sid])

    def copy(self) -> "SymbolTable":
        other = SymbolTable()
        other.names = list(self.names)
        other.ranks = list(self.ranks)
        other.origins = list(self.origins)
        other._by_name = dict(self._by_name)
        return other


class RankedTree:
    """Arena tree over the symbols of ``table``."""

    def __init__(self, table: SymbolTable):
        self.table = table
        self.labels: list[int] = []
        self.children: list[list[int]] = []
        self.parent: list[int] = []
        self.root = -1
        self.size = 0

    def add_node(self, label: int, children: list[int] | None = None) -> int:
        v = len(self.labels)
        kids = children if children is not None else []
        self.labels.append(label)
        self.children.append(kids)
        self.parent.append(-1)
        for c in kids:
            self.parent[c] = v
        self.size += 1
        return v

    def rank_of(self, label: int) -> int:
        return 0 if label < 0 else self.table.ranks[label]

    def preorder(self) -> list[int]:
        out: list[int] = []
        if self.root < 0:
            return out
        kids = self.children
        stack = [self.root]
        pop, push, extend = stack.pop, out.append, stack.extend
        while stack:
            v = pop()
            push(v)
            ch = kids[v]
            if ch:
                if len(ch) == 1:
                    stack.append(ch[0])
                else:
                    extend(reversed(ch))
        return out

    def postorder(self) -> list[int]:
        out: list[int] = []
        if self.root < 0:
            return out
        kids = self.children
        stack = [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(kids[v])
        out.reverse()
        return out

    def preorder_labels(self) -> list[int]:
        labels = self.labels
        return [labels[v] for v in self.preorder()]

    def iter_labels(self) -> Iterator[int]:
        labels = self.labels
        for v in self.preorder():
            yield labels[v]

    def compact(self) -> "RankedTree":
        """Copy of the live part with node ids renumbered in preorder."""
        out = RankedTree(self.table)
        order = self.preorder()
        index = {v: i for i, v in enumerate(order)}
        labels, kids = self.labels, self.children
        out.labels = [labels[v] for v in order]
        out.children = [[index[c] for c in kids[v]] for v in order]
        out.parent = [-1] * len(order)
        for i, ch in enumerate(out.children):
            for c in ch:
                out.parent[c] = i
        out.root = 0 if order else -1
        out.size = len(order)
        return out

    def copy(self) -> "RankedTree":
        return self.compact()

    def check(self) -> None:
        """Raise ValueError if arities or parent pointers are inconsistent."""
        seen = 0
        for v in self.preorder():
            seen += 1
            lab = self.labels[v]
            if len(self.children[v]) != self.rank_of(lab):
                raise ValueError(
                    f"node {v} labelled {self.label_name(lab)} has "
                    f"{len(self.children[v])} children, rank is {self.rank_of(lab)}"
                )
            for c in self.children[v]:
                if self.parent[c] != v:
                    raise ValueError(f"parent pointer of node {c} is stale")
        if self.root >= 0 and self.parent[self.root] != -1:
            raise ValueError("root has a parent")
        if seen != self.size:
            raise ValueError(f"size field {self.size} but {seen} live nodes")

    def label_name(self, label: int) -> str:
        return f"y{-label}" if label < 0 else self.table.names[label]

    def same_as(self, other: "RankedTree") -> bool:
        """Structural equality with labels compared by name."""
        if self.size != other.size:
            return False
        a = self.preorder_labels()
        b = other.preorder_labels()
        if self.table is other.table:
            return a == b
        return [self.label_name(x) for x in a] == [other.label_name(x) for x in b]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RankedTree):
            return NotImplemented
        return self.same_as(other)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        text = serialize_term(self) if self.size <= 40 else f"<{self.size} nodes>"
        return f"RankedTree({text})"


# ---------------------------------------------------------------------------
# term text

_TOKEN_RE = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|(\()|(\))|(,)|(\S)|$)")


def parse_term(
    src: str,
    table: SymbolTable | None = None,
    params: dict[str, int] | None = None,
) -> tuple[RankedTree, SymbolTable]:
    """Parse ``name | name(t1,...,tk)`` into an arena tree.

    New names get symbol ids in order of first occurrence, with the rank
    given by their arity.  ``params`` maps parameter names to their
    (negative) labels; parameters must be leaves.
    """
    if table is None:
        table = SymbolTable()
    tree = RankedTree(table)
    children, parent = tree.children, tree.parent
    # during the scan a node holds an index into `seen` (names in first-occurrence order)
    local: list[int] = []
    seen: list[str] = []
    seen_index: dict[str, int] = {}
    offsets: list[int] = []
    stack: list[int] = []
    last = -1  # most recent name node, may still receive '('
    expect_term = True
    pos, n = 0, len(src)
    while True:
        m = _TOKEN_RE.match(src, pos)
        if m.lastindex is None:  # end of input
            break
        kind = m.lastindex
        start = m.start(kind)
        pos = m.end()
        if kind == 5:
            raise TermSyntaxError(f"unexpected character {m.group(5)!r}", start)
        if kind == 1:
            if not expect_term:
                raise TermSyntaxError("expected ',' '(' or ')'", start)
            name = m.group(1)
            idx = seen_index.get(name)
            if idx is None:
                idx = seen_index[name] = len(seen)
                seen.append(name)
            v = len(local)
            local.append(idx)
            offsets.append(start)
            children.append([])
            parent.append(-1)
            if stack:
                p = stack[-1]
                children[p].append(v)
                parent[v] = p
            else:
                tree.root = v
            last = v
            expect_term = False
        elif kind == 2:
            if last < 0:
                raise TermSyntaxError("'(' must follow a name", start)
            stack.append(last)
            last = -1
            expect_term = True
        else:
            if expect_term or not stack:
                raise TermSyntaxError(f"unexpected {m.group(kind)!r}", start)
            last = -1
            if kind == 3:
                stack.pop()
                expect_term = False
            else:
                expect_term = True
        if not stack and not expect_term and last < 0:
            rest = _TOKEN_RE.match(src, pos)
            if rest.lastindex is not None:
                raise TermSyntaxError("trailing input after complete term", rest.start(rest.lastindex))
            break
    if stack:
        raise TermSyntaxError("unclosed '('", n)
    if tree.root < 0 or expect_term:
        raise TermSyntaxError("empty or incomplete term", n)

    arity: list[int] = [-1] * len(seen)
    for v, idx in enumerate(local):
        k = len(children[v])
        if arity[idx] < 0:
            arity[idx] = k
        elif arity[idx] != k:
            raise RankConflictError(
                f"symbol {seen[idx]!r} used with arities {arity[idx]} and {k} "
                f"(offset {offsets[v]})"
            )
    label_of: list[int] = []
    for idx, name in enumerate(seen):
        if params is not None and name in params:
            if arity[idx] != 0:
                raise TermSyntaxError(f"parameter {name!r} cannot have children", offsets[local.index(idx)])
            label_of.append(params[name])
        else:
            label_of.append(table.add(name, arity[idx]))
    tree.labels = [label_of[idx] for idx in local]
    tree.size = len(local)
    return tree, table


def serialize_term(t: RankedTree, param_names: list[str] | None = None) -> str:
    out: list[str] = []
    labels, kids, names = t.labels, t.children, t.table.names

    def name_of(lab: int) -> str:
        if lab >= 0:
            return names[lab]
        if param_names is not None:
            return param_names[-lab - 1]
        return f"y{-lab}"

    # stack items: node id, or a literal string to emit
    stack: list[int | str] = [t.root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        ch = kids[item]
        out.append(name_of(labels[item]))
        if ch:
            out.append("(")
            stack.append(")")
            for i in range(len(ch) - 1, -1, -1):
                stack.append(ch[i])
                if i:
                    stack.append(",")
    return "".join(out)


# ---------------------------------------------------------------------------
# chains and counts


@dataclass(frozen=True)
class Chain:
    top: int
    bottom: int
    letter: int
    length: int


@dataclass
class ChainReport:
    chains: list[Chain]
    maximal_chain_count: int

    def by_letter(self) -> dict[int, list[Chain]]:
        out: dict[int, list[Chain]] = {}
        for ch in self.chains:
            out.setdefault(ch.letter, []).append(ch)
        return out


def enumerate_maximal_chains(t: RankedTree) -> ChainReport:
    """All a-maximal chains of length >= 2, grouped per letter.

    Also counts maximal runs of unary nodes regardless of label.
    """
    labels, kids, parent = t.labels, t.children, t.parent
    ranks = t.table.ranks
    found: list[Chain] = []
    runs = 0
    for v in t.preorder():
        a = labels[v]
        if a < 0 or ranks[a] != 1:
            continue
        p = parent[v]
        p_unary = p >= 0 and labels[p] >= 0 and ranks[labels[p]] == 1
        if not p_unary:
            runs += 1
        if p_unary and labels[p] == a:
            continue
        length, bottom = 1, v
        u = kids[v][0]
        while labels[u] == a:
            length += 1
            bottom = u
            u = kids[u][0]
        if length >= 2:
            found.append(Chain(v, bottom, a, length))
    found.sort(key=lambda c: c.letter)
    return ChainReport(found, runs)


def count_by_rank(t: RankedTree) -> tuple[int, int, int]:
    ranks = t.table.ranks
    labels = t.labels
    n0 = n1 = n2 = 0
    for v in t.preorder():
        lab = labels[v]
        r = 0 if lab < 0 else ranks[lab]
        if r == 0:
            n0 += 1
        elif r == 1:
            n1 += 1
        else:
            n2 += 1
    return n0, n1, n2


def trees_equal(a: RankedTree, b: RankedTree) -> bool:
    return a.same_as(b)
