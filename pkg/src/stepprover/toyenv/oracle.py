"""Brute-force ground truth for the toy system.

oracle_solve enumerates the finite tactic alphabet breadth-first (split_trans
and rw are excluded: their argument spaces are unbounded), deduplicating on
canonical state text at first visit. BFS visits shallow states first, so
dedup never loses a shortest proof, and expanding tactics in lexicographic
order makes the returned proof the lexicographically smallest among the
shortest ones.

generate_corpus emits seed-deterministic true equations, discarding any
theorem the oracle cannot solve within depth 12.
"""

from __future__ import annotations

import random
from collections import deque

from ..model import Theorem, TheoremSource
from .env import ToyTheorem
from .terms import (
    BASE_TACTICS,
    REWRITE_RULES,
    Term,
    Z,
    normalization_trace,
    rewrite_equation,
    term_of_int,
)

__all__ = ["oracle_solve", "generate_corpus", "InvalidCount"]

ORACLE_CORPUS_DEPTH = 12


class InvalidCount(ValueError):
    """Corpus generation asked for a non-positive theorem count."""


def oracle_solve(theorem: ToyTheorem | str, max_depth: int) -> list[str] | None:
    """Shortest proof within max_depth over the base tactic alphabet, or None.

    max_depth must be >= 1. The search is exhaustive up to depth, so None is
    a proof that no base-alphabet proof of that length exists. Base tactics
    never split goals, so states are bare equations here; first-visit dedup
    is safe because breadth-first order reaches every state at its minimal
    depth."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if isinstance(theorem, str):
        theorem = ToyTheorem.parse(theorem)
    root = (theorem.lhs, theorem.rhs)
    queue: deque[tuple[tuple, tuple[str, ...]]] = deque([(root, ())])
    seen = {root}
    while queue:
        equation, path = queue.popleft()
        if len(path) == max_depth:
            continue
        for tactic in BASE_TACTICS:
            if tactic == "refl":
                if equation[0] == equation[1]:
                    return list(path) + [tactic]
                continue
            rewritten = rewrite_equation(equation, REWRITE_RULES[tactic])
            if rewritten is not None and rewritten not in seen:
                seen.add(rewritten)
                queue.append((rewritten, path + (tactic,)))
    return None


def _random_term(rng: random.Random, value: int, depth: int) -> Term:
    """A random ground term evaluating to `value`, at most `depth` levels of
    structure before bottoming out in a literal S-chain."""
    if depth <= 0:
        return term_of_int(value)
    kinds = ["lit", "succ", "add", "mul"] if value > 0 else ["lit", "add", "mul_zero"]
    kind = rng.choice(kinds)
    if kind == "lit":
        return term_of_int(value)
    if kind == "succ":
        return ("S", _random_term(rng, value - 1, depth - 1))
    if kind == "add":
        left = rng.randint(0, value)
        return (
            "add",
            _random_term(rng, left, depth - 1),
            _random_term(rng, value - left, depth - 1),
        )
    if kind == "mul_zero":
        return ("mul", _random_term(rng, rng.randint(0, 2), depth - 1), Z)
    divisors = [d for d in range(1, value + 1) if value % d == 0]
    d = rng.choice(divisors)
    return (
        "mul",
        _random_term(rng, d, depth - 1),
        _random_term(rng, value // d, depth - 1),
    )


def generate_corpus(
    seed: int,
    count: int,
    max_value: int = 8,
    max_term_depth: int = 2,
    oracle_depth: int = ORACLE_CORPUS_DEPTH,
) -> list[Theorem]:
    """Generate `count` true theorems, byte-deterministic in the seed, each
    provable within oracle_depth steps.

    Solvability is checked constructively: normalizing both sides and closing
    with refl is a proof of length len(lhs trace) + len(rhs trace) - 1, so
    candidates whose bound exceeds oracle_depth are discarded and redrawn
    (running the exhaustive oracle to prove unsolvability would dominate
    generation time). Everything kept is oracle-solvable within the bound."""
    if count < 1:
        raise InvalidCount(f"InvalidCount: count must be >= 1, got {count}")
    rng = random.Random(seed)
    theorems: list[Theorem] = []
    seen_statements: set[str] = set()
    while len(theorems) < count:
        value = rng.randint(0, max_value)
        lhs = _random_term(rng, value, max_term_depth)
        rhs = _random_term(rng, value, max_term_depth)
        toy = ToyTheorem(lhs=lhs, rhs=rhs)
        statement = toy.statement
        if statement in seen_statements:
            continue
        proof_bound = len(normalization_trace(lhs)) + len(normalization_trace(rhs)) - 1
        if proof_bound > oracle_depth:
            continue
        seen_statements.add(statement)
        theorems.append(
            Theorem(
                id=f"toy-{len(theorems):04d}",
                statement=statement,
                source=TheoremSource.TOY_CORPUS,
            )
        )
    return theorems
