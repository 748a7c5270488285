"""Toy environment sessions: deterministic tactic application.

A session owns the state table for one proof attempt. State ids are dense,
monotone, and never reused within the session; every state stays alive for
the session lifetime because searches revisit arbitrary nodes. A session is
owned by exactly one worker at a time; many sessions run concurrently.

Tactic language (all tactics act on the first goal):
  refl                  close the goal when lhs and rhs are identical
  add_zero, add_succ,
  mul_zero, mul_succ,
  comm_add, comm_mul    rewrite the leftmost-outermost redex in the equation
  rw <hyp>              rewrite via hypothesis <hyp> : a = b (a -> b), once
  split_trans <term>    replace "l = r" with goals "l = <term>", "<term> = r"

Tactic-level failures (unknown tactic, no redex, unknown hypothesis, bad
argument) come back as Error outcomes with a one-line message; referencing a
state id the session never issued is a caller bug and raises UnknownState.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..model import ApplyOutcome, Goal, TacticState
from .terms import (
    REWRITE_RULES,
    Equation,
    ToyParseError,
    eval_term,
    parse_equation,
    parse_equation_cached,
    parse_term,
    print_equation,
    print_term,
    rewrite_equation,
    substitution_rule,
)

__all__ = [
    "ToyTheorem",
    "ToySession",
    "UnknownState",
    "DuplicateHypothesisName",
    "init_session",
]

_session_ids = itertools.count(1)


class UnknownState(KeyError):
    """A state_id that the session never issued."""


class DuplicateHypothesisName(ValueError):
    """Augmenting with a hypothesis name that is already present."""


@dataclass(frozen=True)
class ToyTheorem:
    """A ground equation; true iff both sides evaluate to the same number."""

    lhs: tuple
    rhs: tuple

    @property
    def statement(self) -> str:
        return print_equation((self.lhs, self.rhs))

    @property
    def is_true(self) -> bool:
        return eval_term(self.lhs) == eval_term(self.rhs)

    @staticmethod
    def parse(statement: str) -> "ToyTheorem":
        lhs, rhs = parse_equation(statement)
        return ToyTheorem(lhs=lhs, rhs=rhs)


def _goal_equation(goal: Goal) -> Equation:
    return parse_equation_cached(goal.target)


@dataclass
class ToySession:
    """One proof attempt against the toy environment."""

    theorem: ToyTheorem
    theorem_id: str = "toy"
    session_id: int = field(default_factory=lambda: next(_session_ids))
    _states: dict[int, TacticState] = field(default_factory=dict)
    _next_id: int = 0

    def _register(self, goals: tuple[Goal, ...]) -> TacticState:
        state = TacticState(state_id=self._next_id, goals=goals)
        self._states[self._next_id] = state
        self._next_id += 1
        return state

    def state(self, state_id: int) -> TacticState:
        try:
            return self._states[state_id]
        except KeyError:
            # no session id in the message: internal ids are process-global
            # and would make wire transcripts nondeterministic
            raise UnknownState(f"UnknownState: no state {state_id} in this session")

    @property
    def root(self) -> TacticState:
        return self._states[0]

    def apply(self, state_id: int, tactic: str) -> ApplyOutcome:
        """Apply a tactic to the first goal of a stored state.

        Deterministic: the same (state_id, tactic) always yields the same
        outcome. NewState outcomes register the successor in the table.
        """
        state = self.state(state_id)
        if state.is_proved:
            return ApplyOutcome.error("NoGoals: state is already proved")
        goal, rest = state.goals[0], state.goals[1:]
        tactic = tactic.strip()

        if tactic == "refl":
            lhs, rhs = _goal_equation(goal)
            if lhs != rhs:
                return ApplyOutcome.error(
                    f"ReflFailed: sides differ syntactically: {goal.target}"
                )
            if not rest:
                return ApplyOutcome.proved()
            return ApplyOutcome.new_state_of(self._register(rest))

        if tactic in REWRITE_RULES:
            rewritten = rewrite_equation(_goal_equation(goal), REWRITE_RULES[tactic])
            if rewritten is None:
                return ApplyOutcome.error(f"NoApplicableRedex: {tactic} does not apply")
            return self._replace_first_goal(goal, rest, rewritten)

        if tactic.startswith("rw ") or tactic == "rw":
            name = tactic[2:].strip()
            if not name:
                return ApplyOutcome.error("BadArgument: rw needs a hypothesis name")
            prop = dict(goal.hypotheses).get(name)
            if prop is None:
                return ApplyOutcome.error(f"UnknownHypothesis: {name}")
            source, target = parse_equation_cached(prop)
            rewritten = rewrite_equation(
                _goal_equation(goal), substitution_rule(source, target)
            )
            if rewritten is None:
                return ApplyOutcome.error(
                    f"NoApplicableRedex: {print_term(source)} does not occur"
                )
            return self._replace_first_goal(goal, rest, rewritten)

        if tactic.startswith("split_trans ") or tactic == "split_trans":
            arg = tactic[len("split_trans") :].strip()
            if not arg:
                return ApplyOutcome.error("BadArgument: split_trans needs a term")
            try:
                mid = parse_term(arg)
            except ToyParseError as exc:
                return ApplyOutcome.error(f"BadArgument: {exc}")
            lhs, rhs = _goal_equation(goal)
            first = Goal.make(goal.hypotheses, print_equation((lhs, mid)))
            second = Goal.make(goal.hypotheses, print_equation((mid, rhs)))
            return ApplyOutcome.new_state_of(self._register((first, second) + rest))

        head = tactic.split()[0] if tactic else ""
        return ApplyOutcome.error(f"UnknownTactic: {head!r}")

    def _replace_first_goal(
        self, goal: Goal, rest: tuple[Goal, ...], equation: Equation
    ) -> ApplyOutcome:
        new_goal = Goal.make(goal.hypotheses, print_equation(equation))
        return ApplyOutcome.new_state_of(self._register((new_goal,) + rest))

    def augment(self, state_id: int, name: str, proposition: str) -> TacticState:
        """Append (name, proposition) to every goal's hypotheses as a known fact.

        The proposition must parse as an equation; the name must be unused in
        every goal (a collision anywhere would break hypothesis uniqueness).
        """
        state = self.state(state_id)
        parse_equation(proposition)  # raises ToyParseError on malformed input
        for goal in state.goals:
            if any(existing == name for existing, _ in goal.hypotheses):
                raise DuplicateHypothesisName(
                    f"DuplicateHypothesisName: {name} already present"
                )
        goals = tuple(
            Goal.make(goal.hypotheses + ((name, proposition),), goal.target)
            for goal in state.goals
        )
        return self._register(goals)

    def close(self) -> None:
        """Sessions hold no external resources; provided for interface parity."""


def init_session(theorem: ToyTheorem | str, theorem_id: str = "toy") -> tuple[ToySession, TacticState]:
    """Open a session on a theorem; the root state has the bare statement as
    its single goal (state_id 0, no hypotheses). Raises ToyParseError with a
    byte offset when given a malformed statement string."""
    if isinstance(theorem, str):
        theorem = ToyTheorem.parse(theorem)
    session = ToySession(theorem=theorem, theorem_id=theorem_id)
    root = session._register((Goal.make((), theorem.statement),))
    return session, root
