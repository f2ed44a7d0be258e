"""Command-line front end.

Exit codes: 0 success, 1 verification or sync mismatch, 2 parse or
validation error, 3 I/O error, 4 node budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

from . import generators as gen
from .compressor import Compressor, phase_bound
from .grammar import (
    DEFAULT_NODE_BUDGET,
    BudgetExceeded,
    GrammarError,
    SlcfGrammar,
    check,
    cleanup_reasonable,
    expand_preorder,
    grammar_size,
    parse_grammar,
    serialize_grammar,
    tree_from_preorder,
    trivial_grammar,
)
from .normalizer import handle_violation, is_handle, to_cnf, to_handle
from .simulator import SimulationError, TrackedPair, replay, step_from_json, step_to_json
from .tree import RankConflictError, RankedTree, SymbolTable, TermSyntaxError, count_by_rank, parse_term, serialize_term

EXIT_MISMATCH = 1
EXIT_PARSE = 2
EXIT_IO = 3
EXIT_BUDGET = 4

FAMILIES = ("caterpillar", "binary", "comb", "random", "planted")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- I/O helpers ---------------------------------------------------------------


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}", EXIT_IO) from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise CliError(f"cannot write {path}: {e.strerror}", EXIT_IO) from None


class _JsonLines:
    """Optional JSON-lines sink; a no-op when no path is given."""

    def __init__(self, path: str | None):
        self.path = path
        self.lines: list[str] = []

    def add(self, obj: dict) -> None:
        if self.path is not None:
            self.lines.append(json.dumps(obj, sort_keys=True))

    def close(self) -> None:
        if self.path is not None:
            _write(self.path, "".join(x + "\n" for x in self.lines))


def _load_tree(args) -> RankedTree:
    text = _read(args.input)
    try:
        if args.format == "grammar":
            return tree_from_preorder(*_expand(_parse_grammar(text), args.node_budget))
        t, _ = parse_term(text.strip())
        return t
    except (TermSyntaxError, RankConflictError, GrammarError) as e:
        raise CliError(f"parse error: {e}", EXIT_PARSE) from None


def _parse_grammar(text: str) -> SlcfGrammar:
    try:
        g = parse_grammar(text)
        check(g)
        return g
    except (TermSyntaxError, RankConflictError, GrammarError) as e:
        raise CliError(f"invalid grammar: {e}", EXIT_PARSE) from None


def _expand(g: SlcfGrammar, budget: int) -> tuple[SymbolTable, list[int]]:
    try:
        return g.table, expand_preorder(g, budget)
    except BudgetExceeded as e:
        raise CliError(str(e), EXIT_BUDGET) from None


def _load_grammar(args) -> SlcfGrammar:
    text = _read(args.input)
    if args.format == "term":
        try:
            t, _ = parse_term(text.strip())
        except (TermSyntaxError, RankConflictError) as e:
            raise CliError(f"parse error: {e}", EXIT_PARSE) from None
        return trivial_grammar(t, _free_name(t.table, "S"))
    return _parse_grammar(text)


def _free_name(table: SymbolTable, name: str) -> str:
    while name in table:
        name += "_"
    return name


# -- compression -----------------------------------------------------------------


def compress(tree: RankedTree, stats: _JsonLines | None = None, trace: _JsonLines | None = None) -> tuple[SlcfGrammar, Compressor]:
    """Run the compressor, naming the start rule ``S`` when that name is free."""
    on_step = None
    if trace is not None and trace.path is not None:
        on_step = lambda st: trace.add(step_to_json(st, tree.table))  # noqa: E731
    comp = Compressor(tree, on_step=on_step)
    while comp.size > 1:
        st = comp.run_phase()
        if stats is not None:
            stats.add(st.to_dict())
    g = comp.finish()
    if "S" not in tree.table:
        tree.table.rename(g.start, "S")
    return g, comp


def cmd_encode(args) -> int:
    tree = _load_tree(args)
    stats, trace = _JsonLines(args.stats), _JsonLines(args.trace)
    g, _ = compress(tree, stats, trace)
    _write(args.output, serialize_grammar(g))
    stats.close()
    trace.close()
    return 0


def cmd_decode(args) -> int:
    g = _parse_grammar(_read(args.input))
    table, labels = _expand(g, args.node_budget)
    _write(args.output, serialize_term(tree_from_preorder(table, labels)) + "\n")
    return 0


def cmd_verify(args) -> int:
    tree = _load_tree(args)
    want = tree.preorder_labels()
    g, comp = compress(tree)
    text = serialize_grammar(g)
    back = _parse_grammar(text)
    table, got = _expand(back, max(args.node_budget, len(want)))
    names = tree.table.names
    same = [names[x] for x in want] == [table.names[x] for x in got]
    report = {
        "nodes": len(want),
        "grammar_size": grammar_size(g),
        "phases": comp.phase,
        "match": same,
    }
    _write(args.output, json.dumps(report, sort_keys=True) + "\n")
    return 0 if same else EXIT_MISMATCH


def tree_stats(tree: RankedTree) -> dict:
    n0, n1, n2 = count_by_rank(tree)
    n = tree.size
    g, comp = compress(tree.copy())
    r = max((tree.table.ranks[x] for x in set(tree.iter_labels())), default=0)
    reasonable = cleanup_reasonable(g)
    return {
        "nodes": n,
        "constants": n0,
        "unary": n1,
        "wide": n2,
        "max_rank": r,
        "phases": comp.phase,
        "phase_bound": phase_bound(n),
        "grammar_size": grammar_size(g),
        "grammar_rules": len(g.productions),
        "reasonable_size": grammar_size(reasonable),
        "touches": comp.total_touches(),
        "per_phase": [s.to_dict() for s in comp.stats],
    }


def cmd_stats(args) -> int:
    tree = _load_tree(args)
    _write(args.output, json.dumps(tree_stats(tree), sort_keys=True) + "\n")
    return 0


# -- bench -----------------------------------------------------------------------


def _sizes(text: str) -> list[int]:
    """``1000,2000`` or ``2^10..2^20`` (every power of two in the range)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (_one_size(x) for x in part.split("..", 1))
            k = max(0, math.ceil(math.log2(lo))) if lo > 0 else 0
            while 2**k <= hi:
                if 2**k >= lo:
                    out.append(2**k)
                k += 1
        elif part:
            out.append(_one_size(part))
    return out


def _one_size(s: str) -> int:
    if "^" in s:
        b, e = s.split("^", 1)
        return int(b) ** int(e)
    return int(float(s)) if "e" in s.lower() else int(s)


def bench_one(family: str, n: int, seed: int = 0, max_rank: int = 3, g: int = 50, timing: bool = True) -> dict:
    """Compress one generated input and report sizes, phases and node touches.

    For ``planted`` the input is the tree of a grammar of size at most
    ``g`` over letters of rank at most ``max_rank``; the report carries the
    ratio of the output size to ``r*g + r*g*log2(n/(r*g)) + 1``, with the
    logarithm clamped at zero.
    """
    t0 = time.perf_counter()
    planted = None
    if family == "caterpillar":
        tree = gen.caterpillar(n)
    elif family == "binary":
        tree = gen.binary(n)
    elif family == "comb":
        tree = gen.comb(n)
    elif family == "random":
        tree = gen.random_tree(n, max_rank, seed)
    elif family == "planted":
        planted = gen.planted_grammar(g, max_rank, n, seed)
        tree = tree_from_preorder(planted.table, expand_preorder(planted))
    else:
        raise ValueError(f"unknown family {family!r}")
    t1 = time.perf_counter()
    comp = Compressor(tree)
    while comp.size > 1:
        comp.run_phase()
    out = comp.finish()
    t2 = time.perf_counter()
    rep = {
        "family": family,
        "seed": seed,
        "nodes": tree.size,
        "phases": comp.phase,
        "phase_bound": phase_bound(tree.size),
        "grammar_size": grammar_size(out),
        "touches": comp.total_touches(),
        "touches_per_node": comp.total_touches() / tree.size,
    }
    if planted is not None:
        gs = grammar_size(planted)
        r = max(1, max_rank)
        rg = r * gs
        curve = rg + rg * max(0.0, math.log2(tree.size / rg)) + 1
        rep.update({"planted_size": gs, "max_rank": max_rank, "curve": curve, "ratio": grammar_size(out) / curve})
    elif family == "random":
        rep["max_rank"] = max_rank
    if timing:
        rep["generate_seconds"] = round(t1 - t0, 6)
        rep["compress_seconds"] = round(t2 - t1, 6)
    return rep


def cmd_bench(args) -> int:
    lines = []
    for n in _sizes(args.sizes):
        rep = bench_one(args.family, n, args.seed, args.max_rank, args.g, not args.no_timing)
        lines.append(json.dumps(rep, sort_keys=True))
    _write(args.output, "".join(x + "\n" for x in lines))
    return 0


# -- normalize / simulate -------------------------------------------------------


def cmd_normalize(args) -> int:
    g = _load_grammar(args)
    cnf = to_cnf(g)
    log: list = []
    h = to_handle(cnf, log)
    _write(args.output, serialize_grammar(h))
    stats = _JsonLines(args.stats)
    stats.add(
        {
            "input_size": grammar_size(g),
            "cnf_size": grammar_size(cnf),
            "handle_size": grammar_size(h),
            "handle_rules": len(h.productions),
            "skeletons": len(log),
            "skeleton_violations": sum(len(x.violations) for x in log),
            "is_handle": handle_violation(h) is None,
        }
    )
    stats.close()
    return 0


def cmd_simulate(args) -> int:
    g = _load_grammar(args)
    strict = is_handle(g)
    if not strict and not args.no_normalize:
        g = to_handle(to_cnf(g))
        strict = True
    if not strict and len(g.productions) > 1:
        raise CliError(f"grammar is not in handle form: {handle_violation(g)}", EXIT_PARSE)
    stats, trace = _JsonLines(args.stats), _JsonLines(args.trace)
    try:
        if args.replay:
            steps = [step_from_json(json.loads(x), g.table) for x in _read(args.replay).splitlines() if x.strip()]
            tp = replay(g, steps, strict)
            n_steps = len(steps)
        else:
            tp = TrackedPair(g, None, strict)
            comp = Compressor(tp.tree, snapshots=True)
            n_steps = 0
            while comp.size > 1 and comp.phase < args.phases:
                start = len(comp.steps)
                comp.run_phase()
                for st in comp.steps[start:]:
                    trace.add(step_to_json(st, g.table))
                    tp.step(st, st.tree)
                    n_steps += 1
    except SimulationError as e:
        print(f"simulation diverged: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    except (ValueError, KeyError) as e:
        raise CliError(f"bad trace: {e}", EXIT_PARSE) from None
    except BudgetExceeded as e:
        raise CliError(str(e), EXIT_BUDGET) from None
    for rec in tp.counters.calls:
        stats.add(rec.to_dict())
    worst = max((c.credit / c.bound for c in tp.counters.calls if c.bound), default=0.0)
    summary = {
        "steps": n_steps,
        "synced": True,
        "strict": strict,
        "rules": len(tp.order),
        "calls": len(tp.counters.calls),
        "released": tp.counters.released,
        "worst_credit_ratio": worst,
    }
    _write(args.output, json.dumps(summary, sort_keys=True) + "\n")
    stats.close()
    trace.close()
    return 0


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treerecomp", description="Grammar compression of ranked trees by recompression.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt: str):
        sp.add_argument("--input", "-i", default="-", help="input file (default stdin)")
        sp.add_argument("--output", "-o", default=None, help="output file (default stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET, help="max nodes when expanding a grammar")
        sp.add_argument("--format", choices=("term", "grammar"), default=fmt, help=f"input format (default {fmt})")

    sp = sub.add_parser("encode", help="compress a term into a grammar")
    common(sp, "term")
    sp.add_argument("--stats", help="write per-phase statistics as JSON lines")
    sp.add_argument("--trace", help="write the phase trace as JSON lines")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", help="expand a grammar into its term")
    common(sp, "grammar")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("verify", help="encode, decode and compare")
    common(sp, "term")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("stats", help="report sizes, phases and touches for one input")
    common(sp, "term")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("bench", help="compress generated inputs and report JSON lines")
    sp.add_argument("family", choices=FAMILIES)
    sp.add_argument("--sizes", default="2^10..2^14", help="e.g. 1000,5000 or 2^10..2^20 (planted: target sizes)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-rank", type=int, default=3)
    sp.add_argument("--g", type=int, default=50, help="planted grammar size")
    sp.add_argument("--no-timing", action="store_true", help="leave wall times out of the report")
    sp.add_argument("--output", "-o", default=None)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("normalize", help="rewrite a grammar into handle form")
    common(sp, "grammar")
    sp.add_argument("--stats", help="write a size report as JSON lines")
    sp.set_defaults(func=cmd_normalize)

    sp = sub.add_parser("simulate", help="replay compression steps on a handle grammar")
    common(sp, "grammar")
    sp.add_argument("--phases", type=int, default=3)
    sp.add_argument("--replay", help="replay this trace file instead of running the compressor")
    sp.add_argument("--no-normalize", action="store_true", help="do not normalize a non-handle input")
    sp.add_argument("--stats", help="write per-call counters as JSON lines")
    sp.add_argument("--trace", help="write the phase trace as JSON lines")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"treerecomp: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
