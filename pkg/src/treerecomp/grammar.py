"""Straight-line linear context-free tree grammars.

A production ``A(y1,...,yk) -> t`` stores its right-hand side as a
:class:`RankedTree` whose parameter leaves carry labels ``-1..-k``.  The
productions are kept in straight-line order and the start symbol is the
last one.  A symbol is a nonterminal exactly when it has a production.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .tree import RankedTree, SymbolTable, TermSyntaxError, parse_term, serialize_term

DEFAULT_NODE_BUDGET = 10**8


class GrammarError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    def __init__(self, budget: int):
        super().__init__(f"expansion exceeds the node budget of {budget}")
        self.budget = budget


@dataclass
class Production:
    lhs: int
    rhs: RankedTree

    def size(self) -> int:
        return sum(1 for lab in self.rhs.iter_labels() if lab >= 0)


class SlcfGrammar:
    def __init__(self, table: SymbolTable, productions: list[Production] | None = None):
        self.table = table
        self.productions: list[Production] = list(productions or [])
        self._index: dict[int, int] | None = None

    @property
    def start(self) -> int:
        return self.productions[-1].lhs

    def index(self) -> dict[int, int]:
        if self._index is None or len(self._index) != len(self.productions):
            self._index = {p.lhs: i for i, p in enumerate(self.productions)}
        return self._index

    def rule(self, nonterminal: int) -> Production:
        return self.productions[self.index()[nonterminal]]

    def is_nonterminal(self, sid: int) -> bool:
        return sid in self.index()

    def nonterminals(self) -> list[int]:
        return [p.lhs for p in self.productions]

    def size(self) -> int:
        return grammar_size(self)

    def __len__(self) -> int:
        return len(self.productions)

    def __repr__(self) -> str:
        return f"SlcfGrammar({len(self.productions)} productions, size {self.size()})"


def chain_rhs(table: SymbolTable, letters: list[int]) -> RankedTree:
    """``letters[0](letters[1](...(y1)))`` as a rank-1 right-hand side."""
    k = len(letters)
    t = RankedTree(table)
    # node i holds letters[i], node k is the parameter
    t.labels = list(letters) + [-1]
    t.children = [[i + 1] for i in range(k)] + [[]]
    t.parent = list(range(-1, k))
    t.root = 0
    t.size = k + 1
    return t


def build_tree(table: SymbolTable, term) -> RankedTree:
    """Tree from nested ``(label, [children])`` tuples; a bare int is a leaf.

    Negative labels are parameters.
    """
    t = RankedTree(table)
    # post-order construction without recursion
    stack: list[tuple[object, list[int] | None]] = [(term, None)]
    done: list[int] = []
    while stack:
        node, built = stack.pop()
        if isinstance(node, int):
            done.append(t.add_node(node))
            continue
        label, kids = node
        if built is None:
            stack.append((node, []))
            for c in reversed(kids):
                stack.append((c, None))
            continue
        n = len(kids)
        ch = done[len(done) - n :] if n else []
        if n:
            del done[len(done) - n :]
        done.append(t.add_node(label, ch))
    t.root = done[-1]
    return t


def grammar_size(g: SlcfGrammar) -> int:
    return sum(p.size() for p in g.productions)


# ---------------------------------------------------------------------------
# validation


def validate(g: SlcfGrammar) -> list[str]:
    """Violations as human readable strings; an empty list means valid."""
    problems: list[str] = []
    table = g.table
    if not g.productions:
        return ["grammar has no productions"]
    defined: set[int] = set()
    all_lhs = {p.lhs for p in g.productions}
    for i, p in enumerate(g.productions):
        name = table.names[p.lhs] if 0 <= p.lhs < len(table) else f"#{p.lhs}"
        where = f"production {i} ({name})"
        if p.lhs in defined:
            problems.append(f"{where}: second production for the same nonterminal")
        k = table.ranks[p.lhs]
        rhs = p.rhs
        params_seen: list[int] = []
        non_param = 0
        for v in rhs.preorder():
            lab = rhs.labels[v]
            arity = len(rhs.children[v])
            if lab < 0:
                params_seen.append(-lab)
                if arity:
                    problems.append(f"{where}: parameter y{-lab} has children")
                continue
            non_param += 1
            if table.ranks[lab] != arity:
                problems.append(
                    f"{where}: {table.names[lab]} has {arity} children but rank {table.ranks[lab]}"
                )
            if lab in all_lhs and lab not in defined:
                problems.append(
                    f"{where}: uses {table.names[lab]} before its production (straight-line order)"
                )
        if sorted(params_seen) != list(range(1, k + 1)):
            problems.append(f"{where}: parameters {params_seen} are not exactly y1..y{k} once each")
        elif params_seen != list(range(1, k + 1)):
            problems.append(f"{where}: parameters occur out of order {params_seen}")
        if non_param == 0 and k == 0:
            problems.append(f"{where}: empty right-hand side")
        defined.add(p.lhs)
    if table.ranks[g.start] != 0:
        problems.append(f"start {table.names[g.start]} has rank {table.ranks[g.start]}, expected 0")
    return problems


def check(g: SlcfGrammar) -> None:
    problems = validate(g)
    if problems:
        raise GrammarError("; ".join(problems[:5]))


# ---------------------------------------------------------------------------
# evaluation


def _compile(rhs: RankedTree) -> tuple[list[int], list[int]]:
    """Preorder labels of ``rhs`` and, per position, the end of its subtree."""
    order = rhs.preorder()
    labels = [rhs.labels[v] for v in order]
    n = len(order)
    ends = [0] * n
    index = {v: i for i, v in enumerate(order)}
    for i in range(n - 1, -1, -1):
        kids = rhs.children[order[i]]
        ends[i] = ends[index[kids[-1]]] if kids else i + 1
    return labels, ends


def expand_preorder(g: SlcfGrammar, node_budget: int = DEFAULT_NODE_BUDGET) -> list[int]:
    """Labels of the evaluated tree in preorder, without building the tree.

    A ranked tree is determined by its preorder label sequence, so this is
    enough to compare grammars with trees.  Expansion keeps an explicit
    stack of pending segments; a segment that ends where its caller ends is
    not kept, so long chains of rank-1 nonterminals do not grow the stack.
    """
    ranks = g.table.ranks
    compiled: dict[int, tuple[list[int], list[int]]] = {}
    # a rule A(y1..yk) -> f(y1..yk) just renames a letter: its arguments
    # already follow it in preorder
    rename: dict[int, int] = {}
    for p in g.productions:
        toks, ends = _compile(p.rhs)
        head = toks[0]
        if head >= 0 and toks[1:] == list(range(-1, -len(toks), -1)):
            head = rename.get(head, head)
            if head not in compiled:
                rename[p.lhs] = head
                continue
        compiled[p.lhs] = (toks, ends)
    out: list[int] = []
    push = out.append
    if g.start in rename:
        return [rename[g.start]]
    toks, ends = compiled[g.start]
    i, stop, env = 0, len(toks), ()
    stack: list[tuple] = []
    while True:
        while i < stop:
            lab = toks[i]
            if lab < 0:
                nxt = i + 1
                if nxt < stop:
                    stack.append((toks, ends, nxt, stop, env))
                toks, ends, i, stop, env = env[-lab - 1]
                continue
            rule = compiled.get(lab)
            if rule is None:
                push(rename.get(lab, lab))
                i += 1
                if len(out) > node_budget:
                    raise BudgetExceeded(node_budget)
                continue
            args = []
            j = i + 1
            for _ in range(ranks[lab]):
                e = ends[j]
                args.append((toks, ends, j, e, env))
                j = e
            if j < stop:
                stack.append((toks, ends, j, stop, env))
            toks, ends = rule
            i, stop, env = 0, len(toks), args
        if not stack:
            break
        toks, ends, i, stop, env = stack.pop()
    return out


def tree_from_preorder(table: SymbolTable, labels: list[int]) -> RankedTree:
    """Rebuild a tree from its preorder labels using the symbol ranks."""
    ranks = table.ranks
    n = len(labels)
    t = RankedTree(table)
    children: list[list[int]] = [[] for _ in range(n)]
    parent = [-1] * n
    # open[k] is a node that still expects children
    open_nodes: list[int] = []
    need: list[int] = []
    for v in range(n):
        if open_nodes:
            p = open_nodes[-1]
            children[p].append(v)
            parent[v] = p
            need[-1] -= 1
            if need[-1] == 0:
                open_nodes.pop()
                need.pop()
        elif v:
            raise GrammarError("preorder sequence has more than one root")
        r = ranks[labels[v]]
        if r:
            open_nodes.append(v)
            need.append(r)
    if open_nodes:
        raise GrammarError("preorder sequence ends inside a node")
    t.labels = list(labels)
    t.children = children
    t.parent = parent
    t.root = 0
    t.size = n
    return t


def evaluate(g: SlcfGrammar, node_budget: int = DEFAULT_NODE_BUDGET) -> RankedTree:
    """Expand the start symbol into a tree without nonterminals.

    The result is numbered in preorder.  Expansion is iterative, so deep
    trees and deep grammars do not hit the recursion limit.
    """
    return tree_from_preorder(g.table, expand_preorder(g, node_budget))


def expansion_sizes(g: SlcfGrammar) -> dict[int, int]:
    """Number of letter nodes each nonterminal contributes (parameters excluded)."""
    sizes: dict[int, int] = {}
    for p in g.productions:
        total = 0
        for lab in p.rhs.iter_labels():
            if lab >= 0:
                total += sizes.get(lab, 1)
        sizes[p.lhs] = total
    return sizes


# ---------------------------------------------------------------------------
# cleanup

_IDENTITY = -1


def _substitute(rhs: RankedTree, alias: dict[int, int]) -> RankedTree:
    """Copy of ``rhs`` with aliased nonterminals renamed or spliced out."""
    out = RankedTree(rhs.table)
    res: dict[int, int] = {}
    labels, kids = rhs.labels, rhs.children
    for v in rhs.postorder():
        lab = labels[v]
        ch = [res[c] for c in kids[v]]
        target = alias.get(lab, lab) if lab >= 0 else lab
        if target == _IDENTITY and lab >= 0:
            res[v] = ch[0]
            continue
        res[v] = out.add_node(target, ch)
    out.root = res[rhs.root]
    return out


def reachable(g: SlcfGrammar) -> set[int]:
    idx = g.index()
    seen = {g.start}
    todo = [g.start]
    while todo:
        a = todo.pop()
        for lab in g.productions[idx[a]].rhs.iter_labels():
            if lab >= 0 and lab in idx and lab not in seen:
                seen.add(lab)
                todo.append(lab)
    return seen


def with_start(g: SlcfGrammar, start: int) -> SlcfGrammar:
    """Make ``start`` the start symbol and drop what it does not reach."""
    idx = g.index()
    order = [p for p in g.productions if p.lhs != start] + [g.productions[idx[start]]]
    return remove_unreachable(SlcfGrammar(g.table, order))


def remove_unreachable(g: SlcfGrammar) -> SlcfGrammar:
    keep = reachable(g)
    return SlcfGrammar(g.table, [p for p in g.productions if p.lhs in keep])


def cleanup_reasonable(g: SlcfGrammar) -> SlcfGrammar:
    """Inline unit productions and drop unused nonterminals.

    A unit production has at most one non-parameter node on its right-hand
    side.  Inlining walks the productions in order, so every alias already
    points at a resolved symbol when it is used.
    """
    g = remove_unreachable(g)
    alias: dict[int, int] = {}
    kept: list[Production] = []
    last = len(g.productions) - 1
    for i, p in enumerate(g.productions):
        rhs = _substitute(p.rhs, alias) if alias else p.rhs.compact()
        non_param = sum(1 for lab in rhs.iter_labels() if lab >= 0)
        if i != last and non_param <= 1:
            alias[p.lhs] = _IDENTITY if non_param == 0 else rhs.labels[rhs.root]
            continue
        kept.append(Production(p.lhs, rhs))
    out = SlcfGrammar(g.table, kept)
    start = kept[-1]
    root_label = start.rhs.labels[start.rhs.root]
    if start.rhs.size == 1 and out.is_nonterminal(root_label):
        kept[-1] = Production(start.lhs, out.rule(root_label).rhs.compact())
        out = SlcfGrammar(g.table, kept)
    return remove_unreachable(out)


# ---------------------------------------------------------------------------
# text format

_LHS_RE = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")
_PARAM_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def parse_grammar(text: str, table: SymbolTable | None = None) -> SlcfGrammar:
    """Read ``A(y1,...,yk) -> term`` lines; blank lines and ``#`` comments are skipped."""
    if table is None:
        table = SymbolTable()
    lines: list[tuple[int, str, list[str], str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "->" not in line:
            raise TermSyntaxError(f"line {lineno}: missing '->'", 0)
        left, right = line.split("->", 1)
        m = _LHS_RE.match(left)
        if m is None:
            raise TermSyntaxError(f"line {lineno}: bad left-hand side {left.strip()!r}", 0)
        params: list[str] = []
        if m.group(2) is not None:
            params = [s.strip() for s in m.group(2).split(",")]
            if any(not _PARAM_RE.fullmatch(s) for s in params):
                raise TermSyntaxError(f"line {lineno}: bad parameter list", 0)
            if len(set(params)) != len(params):
                raise TermSyntaxError(f"line {lineno}: repeated parameter name", 0)
        lines.append((lineno, m.group(1), params, right))
    if not lines:
        raise GrammarError("grammar text has no productions")
    heads: list[int] = []
    for lineno, name, params, _ in lines:
        sid = table.lookup(name)
        if sid is None:
            heads.append(table.add(name, len(params), "nonterminal"))
        else:
            if table.ranks[sid] != len(params):
                raise GrammarError(
                    f"line {lineno}: {name} declared with {len(params)} parameters, rank is {table.ranks[sid]}"
                )
            heads.append(sid)
    prods: list[Production] = []
    for (lineno, name, params, right), lhs in zip(lines, heads):
        pmap = {p: -(i + 1) for i, p in enumerate(params)}
        try:
            rhs, _ = parse_term(right, table, pmap)
        except TermSyntaxError as e:
            raise TermSyntaxError(f"line {lineno}: {e}", e.position) from None
        prods.append(Production(lhs, rhs))
    return SlcfGrammar(table, prods)


def _param_prefix(g: SlcfGrammar) -> str:
    used = set()
    for p in g.productions:
        for lab in p.rhs.iter_labels():
            if lab >= 0:
                used.add(g.table.names[lab])
    prefix = "y"
    while any(re.fullmatch(re.escape(prefix) + r"\d+", n) for n in used):
        prefix = "_" + prefix
    return prefix


def serialize_grammar(g: SlcfGrammar) -> str:
    prefix = _param_prefix(g)
    lines = []
    for p in g.productions:
        k = g.table.ranks[p.lhs]
        names = [f"{prefix}{i}" for i in range(1, k + 1)]
        head = g.table.names[p.lhs]
        if k:
            head += "(" + ",".join(names) + ")"
        lines.append(f"{head} -> {serialize_term(p.rhs, names)}")
    return "\n".join(lines) + "\n"


def trivial_grammar(t: RankedTree, start_name: str | None = None) -> SlcfGrammar:
    """The one-rule grammar ``S -> t``."""
    table = t.table
    s = table.fresh("nonterminal", 0) if start_name is None else table.add(start_name, 0, "nonterminal")
    return SlcfGrammar(table, [Production(s, t.compact())])
