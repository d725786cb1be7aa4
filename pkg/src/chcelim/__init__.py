"""Elimination of inductively defined data structures from constrained Horn clauses."""

from .analysis import check_class, rewrite_constrained_facts
from .core import Program
from .io import format_program, parse_chc, read_chc
from .strategy import AlgorithmConfig, DivergenceError, TransformResult, run, run_algorithm_e, run_algorithm_ec

__version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig",
    "DivergenceError",
    "Program",
    "TransformResult",
    "check_class",
    "format_program",
    "parse_chc",
    "read_chc",
    "rewrite_constrained_facts",
    "run",
    "run_algorithm_e",
    "run_algorithm_ec",
]
