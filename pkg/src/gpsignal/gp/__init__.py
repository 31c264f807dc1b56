"""Tree-based genetic programming for phase urgency functions."""

from .evolve import EvolutionConfig, EvolutionTrace, GenerationStats, evolve
from .explain import simplify, terminal_frequencies
from .operators import (full, grow, ramped_half_and_half, subtree_crossover, subtree_mutation,
                        tournament_select)
from .tree import (Function, Op, Terminal, Tree, compile_tree, depth, eval_tree, nodes, parse_sexp,
                   size, terminal_counts, to_infix, to_sexp)

__all__ = [
    "EvolutionConfig", "EvolutionTrace", "GenerationStats", "evolve", "simplify",
    "terminal_frequencies", "full", "grow", "ramped_half_and_half", "subtree_crossover",
    "subtree_mutation", "tournament_select", "Function", "Op", "Terminal", "Tree", "compile_tree",
    "depth", "eval_tree", "nodes", "parse_sexp", "size", "terminal_counts", "to_infix", "to_sexp",
]
