"""Ground Peano terms and the rewrite rules of the toy formal system.

Grammar: Z | S(t) | add(t, u) | mul(t, u), written in prefix words:
"0", "S t", "add t u", "mul t u", with parentheses only around compound
arguments. Terms are plain nested tuples ("Z",), ("S", t), ("add", t, u),
("mul", t, u) so the rewrite engine stays cheap.

Rewriting is single-redex, leftmost-outermost over the goal equation
(pre-order: lhs before rhs, a node before its children), which makes every
tactic's effect unique and the whole system deterministic.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Optional

Term = tuple  # ("Z",) | ("S", Term) | ("add", Term, Term) | ("mul", Term, Term)
Equation = tuple  # (lhs: Term, rhs: Term)

Z: Term = ("Z",)


class ToyParseError(ValueError):
    """Malformed term or equation text; carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"ParseError at offset {offset}: {message}")
        self.offset = offset


def print_term(t: Term) -> str:
    head = t[0]
    if head == "Z":
        return "0"
    args = " ".join(_print_arg(a) for a in t[1:])
    return f"{head} {args}"


def _print_arg(t: Term) -> str:
    return "0" if t[0] == "Z" else f"({print_term(t)})"


def print_equation(eq: Equation) -> str:
    return f"{print_term(eq[0])} = {print_term(eq[1])}"


class _Scanner:
    __slots__ = ("text", "pos")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def word(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        return self.text[start : self.pos]


def _parse_term(sc: _Scanner) -> Term:
    sc.skip_ws()
    word = sc.word()
    if word == "0":
        return Z
    if word == "S":
        return ("S", _parse_arg(sc))
    if word in ("add", "mul"):
        return (word, _parse_arg(sc), _parse_arg(sc))
    raise ToyParseError(f"expected term, got {word!r}" if word else "expected term", sc.pos)


def _parse_arg(sc: _Scanner) -> Term:
    sc.skip_ws()
    if sc.peek() == "(":
        sc.pos += 1
        inner = _parse_term(sc)
        sc.skip_ws()
        if sc.peek() != ")":
            raise ToyParseError("unbalanced parenthesis", sc.pos)
        sc.pos += 1
        return inner
    if sc.peek() == "0":
        sc.pos += 1
        return Z
    word_start = sc.pos
    word = sc.word()
    raise ToyParseError(
        f"expected atom or parenthesized term, got {word!r}" if word else "expected argument",
        word_start if word else sc.pos,
    )


def parse_term(text: str) -> Term:
    sc = _Scanner(text)
    t = _parse_term(sc)
    sc.skip_ws()
    if sc.pos != len(sc.text):
        raise ToyParseError(f"trailing input {sc.text[sc.pos:]!r}", sc.pos)
    return t


def parse_equation(text: str) -> Equation:
    sc = _Scanner(text)
    lhs = _parse_term(sc)
    sc.skip_ws()
    if sc.peek() != "=":
        raise ToyParseError("expected '='", sc.pos)
    sc.pos += 1
    rhs = _parse_term(sc)
    sc.skip_ws()
    if sc.pos != len(text):
        raise ToyParseError(f"trailing input {text[sc.pos:]!r}", sc.pos)
    return (lhs, rhs)


@lru_cache(maxsize=1 << 16)
def parse_equation_cached(text: str) -> Equation:
    """Memoized parse_equation; goal texts repeat heavily across a search."""
    return parse_equation(text)


def eval_term(t: Term) -> int:
    head = t[0]
    if head == "Z":
        return 0
    if head == "S":
        return 1 + eval_term(t[1])
    if head == "add":
        return eval_term(t[1]) + eval_term(t[2])
    return eval_term(t[1]) * eval_term(t[2])


def term_of_int(n: int) -> Term:
    t = Z
    for _ in range(n):
        t = ("S", t)
    return t


# --- rewrite rules ----------------------------------------------------------

Rule = Callable[[Term], Optional[Term]]


def _add_zero(t: Term) -> Term | None:
    if t[0] == "add" and t[2] == Z:
        return t[1]
    return None


def _add_succ(t: Term) -> Term | None:
    if t[0] == "add" and t[2][0] == "S":
        return ("S", ("add", t[1], t[2][1]))
    return None


def _mul_zero(t: Term) -> Term | None:
    if t[0] == "mul" and t[2] == Z:
        return Z
    return None


def _mul_succ(t: Term) -> Term | None:
    if t[0] == "mul" and t[2][0] == "S":
        return ("add", ("mul", t[1], t[2][1]), t[1])
    return None


def _comm_add(t: Term) -> Term | None:
    if t[0] == "add":
        return ("add", t[2], t[1])
    return None


def _comm_mul(t: Term) -> Term | None:
    if t[0] == "mul":
        return ("mul", t[2], t[1])
    return None


REWRITE_RULES: dict[str, Rule] = {
    "add_zero": _add_zero,
    "add_succ": _add_succ,
    "mul_zero": _mul_zero,
    "mul_succ": _mul_succ,
    "comm_add": _comm_add,
    "comm_mul": _comm_mul,
}

# The finite alphabet enumerated by the oracle and by tabular policies;
# split_trans and rw are excluded because their argument spaces are unbounded.
BASE_TACTICS: tuple[str, ...] = tuple(sorted(REWRITE_RULES) + ["refl"])


def rewrite_leftmost_outermost(t: Term, rule: Rule) -> Term | None:
    """Rewrite the first redex in pre-order (node before children, left to
    right); returns None when the rule matches nowhere."""
    replacement = rule(t)
    if replacement is not None:
        return replacement
    for i in range(1, len(t)):
        rewritten = rewrite_leftmost_outermost(t[i], rule)
        if rewritten is not None:
            return t[:i] + (rewritten,) + t[i + 1 :]
    return None


def rewrite_equation(eq: Equation, rule: Rule) -> Equation | None:
    """Apply a rule to the single leftmost-outermost redex anywhere in the
    equation, scanning the left side before the right."""
    lhs = rewrite_leftmost_outermost(eq[0], rule)
    if lhs is not None:
        return (lhs, eq[1])
    rhs = rewrite_leftmost_outermost(eq[1], rule)
    if rhs is not None:
        return (eq[0], rhs)
    return None


def substitution_rule(source: Term, target: Term) -> Rule:
    """Rule rewriting the leftmost-outermost occurrence of `source` to `target`."""

    def rule(t: Term) -> Term | None:
        return target if t == source else None

    return rule


_NORMALIZING_RULES = ("add_zero", "add_succ", "mul_zero", "mul_succ")


def normalization_trace(t: Term) -> list[Term]:
    """The term, one rewrite at a time, down to its numeral normal form.

    Uses only the four computation rules (no comm), trying them in a fixed
    order, so the trace is deterministic. Replaying the trace inside an
    equation hits the same redexes (the side being normalized is scanned
    first), which makes len(trace_lhs) + len(trace_rhs) - 1 an achievable
    proof length for any true equation."""
    trace = [t]
    current = t
    while True:
        for name in _NORMALIZING_RULES:
            nxt = rewrite_leftmost_outermost(current, REWRITE_RULES[name])
            if nxt is not None:
                break
        else:
            return trace
        current = nxt
        trace.append(current)
