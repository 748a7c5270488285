"""Deterministic toy formal system: ground Peano equation rewriting.

Serves as the desk-scale environment behind the tactic-application contract,
plus the brute-force oracle used as ground truth in tests.
"""

from .env import (
    DuplicateHypothesisName,
    ToySession,
    ToyTheorem,
    UnknownState,
    init_session,
)
from .oracle import InvalidCount, generate_corpus, oracle_solve
from .terms import (
    BASE_TACTICS,
    ToyParseError,
    eval_term,
    parse_equation,
    parse_term,
    print_equation,
    print_term,
    term_of_int,
)

__all__ = [
    "BASE_TACTICS",
    "DuplicateHypothesisName",
    "InvalidCount",
    "ToyParseError",
    "ToySession",
    "ToyTheorem",
    "UnknownState",
    "eval_term",
    "generate_corpus",
    "init_session",
    "oracle_solve",
    "parse_equation",
    "parse_term",
    "print_equation",
    "print_term",
    "term_of_int",
]
