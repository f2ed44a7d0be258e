"""Grammar compression of ranked trees by recompression.

The compressor turns a ranked tree into a straight-line context-free tree
grammar in linear time; the normalizer and simulator check the size
analysis on concrete grammars.
"""

from .compressor import Compressor, PhaseStats, StepTrace, phase_bound, ttog
from .grammar import (
    BudgetExceeded,
    GrammarError,
    Production,
    SlcfGrammar,
    cleanup_reasonable,
    evaluate,
    expand_preorder,
    grammar_size,
    parse_grammar,
    serialize_grammar,
    trivial_grammar,
)
from .normalizer import is_handle, normalize, to_cnf, to_handle
from .simulator import SimulationError, TrackedPair, simulate
from .tree import RankedTree, SymbolTable, parse_term, serialize_term, trees_equal

__all__ = [
    "BudgetExceeded",
    "Compressor",
    "GrammarError",
    "PhaseStats",
    "Production",
    "RankedTree",
    "SimulationError",
    "SlcfGrammar",
    "StepTrace",
    "SymbolTable",
    "TrackedPair",
    "cleanup_reasonable",
    "evaluate",
    "expand_preorder",
    "grammar_size",
    "is_handle",
    "normalize",
    "parse_grammar",
    "parse_term",
    "phase_bound",
    "serialize_grammar",
    "serialize_term",
    "simulate",
    "to_cnf",
    "to_handle",
    "trees_equal",
    "ttog",
]
