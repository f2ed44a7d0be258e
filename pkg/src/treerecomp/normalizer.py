"""Normal forms for SLCF grammars: Chomsky normal form and handle grammars.

A CNF grammar has rules ``A(y1..yk) -> f(y1..yk)`` or
``A(y1..yk) -> B(y1..yl, C(y_{l+1}..y_l'), y_{l'+1}..yk)``.

A handle grammar has nonterminals of rank 0 and 1 only.  Every right-hand
side reads top-down as a sequence of handles and at most two nonterminals,
where a handle is ``f(w1(g1), .., y, .., wl(gl))`` with unary-letter chains
``wj`` ending in a constant or a rank-0 nonterminal ``gj``.  Rank-0 rules
end in a constant or a rank-0 nonterminal and use at most one rank-1
nonterminal before it.

:func:`to_handle` builds a skeleton tree for every CNF nonterminal bottom-up.
A skeleton keeps only the branching nodes of the spanning tree of the
parameters; everything else is folded into fresh rank-0 and rank-1
nonterminals whose rules already have handle form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .grammar import (
    GrammarError,
    Production,
    SlcfGrammar,
    build_tree,
    grammar_size,
    remove_unreachable,
    with_start,
)
from .tree import RankedTree, SymbolTable

# bounds derived from the construction, see the module functions below
C_CNF = 3
C_HANDLE = 21
C_RANK1 = 15

_IDENTITY = -1


# ---------------------------------------------------------------------------
# Chomsky normal form


def _resolve(rhs: RankedTree, alias: dict[int, int]) -> RankedTree:
    """Rename aliased symbols in ``rhs`` and splice out identity nonterminals."""
    if not alias:
        return rhs.compact()
    out = RankedTree(rhs.table)
    res: dict[int, int] = {}
    for v in rhs.postorder():
        lab = rhs.labels[v]
        ch = [res[c] for c in rhs.children[v]]
        if lab >= 0:
            lab = alias.get(lab, lab)
            if lab == _IDENTITY:
                res[v] = ch[0]
                continue
        res[v] = out.add_node(lab, ch)
    out.root = res[rhs.root]
    return out


def to_cnf(g: SlcfGrammar) -> SlcfGrammar:
    """Equivalent grammar in Chomsky normal form.

    Every letter ``f`` gets one rule ``F -> f(y1..yk)``.  A node with
    non-parameter children is built by plugging the children in one at a
    time from the right, so each step has the shape ``P'(..) -> P(y1..y_{j-1},
    N(..), ..)``.  Each non-parameter node costs at most one rule of size 2
    and each distinct letter one rule of size 1, so the result has size at
    most ``3 * |g|``.  Rank-1 rules ``A(y) -> y`` and rules that only rename
    another nonterminal are inlined.
    """
    table = g.table
    ranks = table.ranks
    nts = set(g.index())
    alias: dict[int, int] = {}
    letter_rule: dict[int, int] = {}
    out: list[Production] = []

    def rule(lhs: int, term) -> None:
        out.append(Production(lhs, build_tree(table, term)))

    def base_of(x: int) -> int:
        if x in nts:
            return x
        f = letter_rule.get(x)
        if f is None:
            f = table.fresh("nonterminal", ranks[x])
            rule(f, (x, [-(i + 1) for i in range(ranks[x])]))
            letter_rule[x] = f
        return f

    for p in g.productions:
        rhs = _resolve(p.rhs, alias)
        labels, kids = rhs.labels, rhs.children
        if labels[rhs.root] < 0:
            alias[p.lhs] = _IDENTITY
            continue
        params = [0] * len(labels)
        sym = [0] * len(labels)
        for v in rhs.postorder():
            lab = labels[v]
            if lab < 0:
                params[v] = 1
                continue
            ch = kids[v]
            params[v] = sum(params[c] for c in ch)
            is_root = v == rhs.root
            subst = [j for j, c in enumerate(ch) if labels[c] >= 0]
            if not subst:
                if not is_root:
                    sym[v] = base_of(lab)
                elif lab in nts:
                    alias[p.lhs] = lab
                else:
                    rule(p.lhs, (lab, [-(i + 1) for i in range(len(ch))]))
                continue
            cur = base_of(lab)
            # argument layout of ``cur``: one parameter per remaining child
            # slot, the plugged children already expanded to their params
            counts = [1] * len(ch)
            for j in reversed(subst):
                c = ch[j]
                before = j  # children left of j are still single parameters
                counts[j] = params[c]
                after = sum(counts[j + 1 :])
                width = before + params[c] + after
                last = j == subst[0]
                lhs = p.lhs if (last and is_root) else table.fresh("nonterminal", width)
                args: list = [-(i + 1) for i in range(before)]
                args.append((sym[c], [-(before + i + 1) for i in range(params[c])]))
                args.extend(-(before + params[c] + i + 1) for i in range(after))
                rule(lhs, (cur, args))
                cur = lhs
            sym[v] = cur
    start = g.start
    while start in alias:
        start = alias[start]
    return with_start(SlcfGrammar(table, out), start)


def cnf_violation(g: SlcfGrammar) -> str | None:
    """First production not in Chomsky normal form, described, or None."""
    nts = set(g.index())
    names = g.table.names
    for p in g.productions:
        t = p.rhs
        root = t.root
        ch = t.children[root]
        lab = t.labels[root]
        inner = [c for c in ch if t.labels[c] >= 0]
        if lab < 0:
            return f"{names[p.lhs]}: right-hand side is a bare parameter"
        if lab not in nts:
            if inner:
                return f"{names[p.lhs]}: letter {names[lab]} with a non-parameter child"
            continue
        if len(inner) != 1:
            return f"{names[p.lhs]}: nonterminal root needs exactly one nonterminal argument"
        c = inner[0]
        if t.labels[c] not in nts:
            return f"{names[p.lhs]}: argument {names[t.labels[c]]} is not a nonterminal"
        if any(t.labels[x] >= 0 for x in t.children[c]):
            return f"{names[p.lhs]}: nested argument is not a parameter list"
    return None


# ---------------------------------------------------------------------------
# handle grammars


def _is_arm(t: RankedTree, v: int, nts: dict[int, int]) -> bool:
    """``v`` roots a chain of unary letters ending in a constant or rank-0 nonterminal."""
    ranks = t.table.ranks
    while True:
        lab = t.labels[v]
        if lab < 0:
            return False
        if lab in nts:
            return ranks[lab] == 0
        r = ranks[lab]
        if r == 0:
            return True
        if r != 1:
            return False
        v = t.children[v][0]


def rule_violation(g: SlcfGrammar, p: Production, nts: dict[int, int] | None = None) -> str | None:
    """Why ``p`` does not have handle form, or None."""
    if nts is None:
        nts = g.index()
    table = g.table
    ranks, names = table.ranks, table.names
    k = ranks[p.lhs]
    who = names[p.lhs]
    if k > 1:
        return f"{who}: nonterminal of rank {k} (HG1)"
    t = p.rhs
    v = t.root
    rank1 = 0
    while True:
        lab = t.labels[v]
        if lab < 0:
            break
        if lab in nts:
            r = ranks[lab]
            if r > 1:
                return f"{who}: uses {names[lab]} of rank {r} (HG1)"
            if r == 0:
                break
            rank1 += 1
            v = t.children[v][0]
            continue
        r = ranks[lab]
        if r == 0:
            break
        if r == 1:
            v = t.children[v][0]
            continue
        ch = t.children[v]
        loose = [c for c in ch if not _is_arm(t, c, nts)]
        if len(loose) > 1:
            rule = "HG2" if k == 1 else "HG3"
            return f"{who}: {names[lab]} has {len(loose)} children that are not chains ({rule})"
        if k == 1 and not loose:
            return f"{who}: parameter lost under {names[lab]} (HG2)"
        v = loose[0] if loose else ch[-1]
    if k == 1 and rank1 > 2:
        return f"{who}: {rank1} rank-1 nonterminals on the spine (HG2)"
    if k == 0 and rank1 > 1:
        return f"{who}: {rank1} rank-1 nonterminals before the end (HG3)"
    return None


def handle_violation(g: SlcfGrammar) -> str | None:
    """The first production that breaks HG1-HG3, described, or None."""
    nts = g.index()
    for p in g.productions:
        msg = rule_violation(g, p, nts)
        if msg is not None:
            return msg
    return None


def is_handle(g: SlcfGrammar) -> bool:
    return handle_violation(g) is None


def rank1_occurrences(g: SlcfGrammar) -> int:
    nts = g.index()
    ranks = g.table.ranks
    return sum(
        1 for p in g.productions for lab in p.rhs.iter_labels() if lab in nts and ranks[lab] == 1
    )


# ---------------------------------------------------------------------------
# skeletons


class _Sk:
    __slots__ = ("label", "kids")

    def __init__(self, label: int, kids: list[_Sk] | None = None):
        self.label = label
        self.kids = kids if kids is not None else []

    def nodes(self) -> list[_Sk]:
        out, stack = [], [self]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(v.kids))
        return out

    def term(self):
        if not self.kids:
            return self.label
        return (self.label, [c.term() for c in self.kids])


def _sk_parent(root: _Sk, target: _Sk) -> _Sk | None:
    for v in root.nodes():
        for c in v.kids:
            if c is target:
                return v
    return None


def _has_param(v: _Sk) -> bool:
    return any(x.label < 0 for x in v.nodes())


@dataclass
class SkeletonRecord:
    nonterminal: int
    rank: int
    nodes: int
    bound: int
    violations: list[str] = field(default_factory=list)


def skeleton_violations(sk: _Sk, table: SymbolTable, nts: set[int], k: int, r: int) -> list[str]:
    """SK1, SK2 and the node bound for a skeleton of a rank-``k`` nonterminal."""
    out: list[str] = []
    ranks, names = table.ranks, table.names
    nodes = sk.nodes()
    for v in nodes:
        if v.label < 0:
            continue
        if len(v.kids) == 1:
            c = v.kids[0]
            if c.label >= 0 and (c.label in nts or ranks[c.label] < 2):
                out.append(f"SK1: {names[c.label]} below degree-1 node {names[v.label]}")
        if v.label not in nts and ranks[v.label] >= 2:
            if sum(1 for c in v.kids if _has_param(c)) < 2:
                out.append(f"SK2: {names[v.label]} has fewer than two parameter subtrees")
    bound = _sk_bound(k, r)
    if len(nodes) > bound:
        out.append(f"skeleton of rank {k} has {len(nodes)} nodes, bound {bound}")
    return out


def _sk_bound(k: int, r: int) -> int:
    # the 2r(k-1)+2 count covers k >= 1; a rank-0 skeleton is a single leaf
    return 2 * r * (k - 1) + 2 if k >= 1 else 1


def to_handle(cnf: SlcfGrammar, log: list[SkeletonRecord] | None = None) -> SlcfGrammar:
    """Equivalent handle grammar of a CNF grammar.

    Per CNF rule at most one merge rule (size 2), one rank-0 rule (size at
    most 2), one handle rule (size at most r) and two rules joining degree-1
    runs (size 4 together) are added: at most ``7r`` nodes and five rank-1
    occurrences per CNF rule.  With the CNF size bound this gives
    ``|G'| <= 21 r |G|`` and at most ``15 |G|`` rank-1 occurrences.

    Skeletons of rank-1 letters and constants are the letters themselves.
    ``log`` receives one :class:`SkeletonRecord` per CNF nonterminal.
    """
    problem = cnf_violation(cnf)
    if problem is not None:
        raise GrammarError(f"not in Chomsky normal form: {problem}")
    table = cnf.table
    ranks = table.ranks
    cnf_nts = cnf.index()
    r = max((ranks[lab] for p in cnf.productions for lab in p.rhs.iter_labels()
             if lab >= 0 and lab not in cnf_nts), default=0)
    new_nts: set[int] = set()
    rules: list[Production] = []
    sks: dict[int, _Sk] = {}

    def fresh(rank: int, term) -> int:
        x = table.fresh("nonterminal", rank)
        rules.append(Production(x, build_tree(table, term)))
        new_nts.add(x)
        return x

    def chain_rule(symbols: list[int]) -> int:
        """Rank-1 nonterminal for the composition of degree-1 symbols."""
        term = -1
        for s in reversed(symbols):
            term = (s, [term])
        return fresh(1, term)

    for p in cnf.productions:
        t = p.rhs
        root = t.root
        head = t.labels[root]
        k = ranks[p.lhs]
        if head not in cnf_nts:
            sk = _Sk(head, [_Sk(-(i + 1)) for i in range(k)])
        else:
            ch = t.children[root]
            pos = next(j for j, c in enumerate(ch) if t.labels[c] >= 0)
            sub = t.labels[ch[pos]]
            sk, inserted = _compose(sks[head], sks[sub], pos, ranks[sub])
            if ranks[sub] >= 1:
                sk = _merge_rank1(sk, inserted, chain_rule)
            else:
                sk = _merge_rank0(sk, inserted, table, new_nts, fresh, chain_rule)
        sks[p.lhs] = sk
        if log is not None:
            log.append(
                SkeletonRecord(
                    p.lhs, k, len(sk.nodes()), _sk_bound(k, r),
                    skeleton_violations(sk, table, new_nts, k, r),
                )
            )
    final = sks[cnf.start]
    assert not final.kids and final.label >= 0
    if final.label in new_nts:
        return with_start(SlcfGrammar(table, rules), final.label)
    out = SlcfGrammar(table, rules + [Production(cnf.start, build_tree(table, final.label))])
    return remove_unreachable(out)


def _clone(src: _Sk, relabel, hole: int = 0) -> tuple[_Sk, _Sk | None]:
    """Deep copy with parameter ``y_i`` renamed to ``relabel(i)``.

    Also returns the copy of the ``y_hole`` leaf, if asked for.
    """
    top = _Sk(src.label)
    found = None
    stack = [(src, top)]
    while stack:
        s, d = stack.pop()
        if s.label < 0:
            if -s.label == hole:
                found = d
            d.label = relabel(-s.label)
            continue
        d.kids = [_Sk(c.label) for c in s.kids]
        stack.extend(zip(s.kids, d.kids))
    return top, found


def _compose(sk_b: _Sk, sk_c: _Sk, pos: int, rank_c: int) -> tuple[_Sk, _Sk]:
    """Copy of ``sk_b`` with parameter ``pos+1`` replaced by a copy of ``sk_c``.

    Returns the new skeleton and the root of the inserted copy.
    """
    hole = pos + 1
    inserted, _ = _clone(sk_c, lambda i: -(i + pos))
    top, slot = _clone(sk_b, lambda i: -(i + rank_c - 1) if i > hole else -i, hole)
    if slot is None:
        raise GrammarError("skeleton without a parameter to plug into")
    if slot is top:
        return inserted, inserted
    # overwrite the hole leaf in place so its parent keeps pointing at it
    slot.label, slot.kids = inserted.label, inserted.kids
    return top, slot


def _merge_rank1(sk: _Sk, inserted: _Sk, chain_rule) -> _Sk:
    """Join the degree-1 node above the hole with a degree-1 inserted root."""
    parent = _sk_parent(sk, inserted)
    if parent is not None and len(parent.kids) == 1 and len(inserted.kids) == 1:
        parent.label = chain_rule([parent.label, inserted.label])
        parent.kids = inserted.kids
    return sk


def _merge_rank0(sk: _Sk, gamma: _Sk, table: SymbolTable, nts: set[int], fresh, chain_rule) -> _Sk:
    """Restore SK1 and SK2 after plugging a parameter-free leaf ``gamma``."""
    ranks = table.ranks
    parent = _sk_parent(sk, gamma)
    if parent is None:
        return sk
    if len(parent.kids) == 1:
        parent.label = fresh(0, (parent.label, [gamma.label]))
        parent.kids = []
        leaf = parent
    else:
        if gamma.label not in nts and ranks[gamma.label] == 0:
            gamma.label = fresh(0, gamma.label)
        leaf = gamma
    v = _sk_parent(sk, leaf)
    if v is None:
        return leaf
    with_params = [j for j, c in enumerate(v.kids) if _has_param(c)]
    if len(with_params) >= 2:
        return sk
    (j,) = with_params
    for i, c in enumerate(v.kids):
        if i != j and c.kids:
            raise GrammarError("parameter-free skeleton subtree is not a leaf")
    args = [-1 if i == j else c.label for i, c in enumerate(v.kids)]
    v.label = fresh(1, (v.label, args))
    v.kids = [v.kids[j]]
    # fold the degree-1 neighbours of v into one rank-1 nonterminal
    run: list[_Sk] = []
    up = _sk_parent(sk, v)
    if up is not None and len(up.kids) == 1:
        run.append(up)
    run.append(v)
    below = v.kids[0]
    if len(below.kids) == 1:
        run.append(below)
    if len(run) >= 2:
        labels = [n.label for n in run]
        if sum(1 for x in labels if x in nts) <= 2:
            x = chain_rule(labels)
        else:
            x = chain_rule([chain_rule(labels[:2]), labels[2]])
        run[0].label = x
        run[0].kids = run[-1].kids
    return sk


def handle_size_bound(g: SlcfGrammar) -> int:
    """``C_HANDLE * r * |g|`` for the maximal letter rank ``r`` of ``g``."""
    nts = g.index()
    ranks = g.table.ranks
    r = max((ranks[lab] for p in g.productions for lab in p.rhs.iter_labels()
             if lab >= 0 and lab not in nts), default=1)
    return C_HANDLE * max(1, r) * grammar_size(g)


def normalize(g: SlcfGrammar, log: list[SkeletonRecord] | None = None) -> SlcfGrammar:
    """``to_handle(to_cnf(g))``."""
    return to_handle(to_cnf(g), log)
