"""Domain types for the step-level proving MDP.

A proof attempt is a multi-turn interaction: the environment reports a tactic
state (hypotheses + goals), the policy proposes a tactic string, the
environment applies it and either produces a new state, closes the proof, or
fails. Successful root-to-proof paths become Trajectory records, the unit of
training data.

All types here are immutable value objects; they are safe to share across
worker threads without synchronization. Proposition strings are opaque at
this level.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

__all__ = [
    "Theorem",
    "Goal",
    "TacticState",
    "TacticCandidate",
    "ApplyKind",
    "ApplyOutcome",
    "TrajectoryStep",
    "Trajectory",
    "EmptyPath",
    "canonicalize_state",
    "label_rewards",
    "write_trajectories",
    "read_trajectories",
]

_WS = re.compile(r"\s+")

TURNSTILE = "⊢"  # ⊢


class EmptyPath(ValueError):
    """Raised when a proof path is empty where a nonempty one is required."""


def _norm(text: str) -> str:
    """Collapse runs of whitespace to single spaces and strip the ends."""
    return _WS.sub(" ", text).strip()


class TheoremSource(Enum):
    TOY_CORPUS = "ToyCorpus"
    EXTERNAL = "External"


@dataclass(frozen=True)
class Theorem:
    """A problem unit: a formal statement with a corpus-unique id."""

    id: str
    statement: str
    source: TheoremSource = TheoremSource.TOY_CORPUS

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("theorem id must be nonempty")
        if not self.statement.strip():
            raise ValueError(f"theorem {self.id!r}: statement must be nonempty")


@dataclass(frozen=True)
class Goal:
    """One open goal: named hypotheses plus a target proposition.

    Hypothesis names must be unique within the goal. Propositions are stored
    as opaque text, already whitespace-normalized at construction.
    """

    hypotheses: tuple[tuple[str, str], ...]
    target: str

    def __post_init__(self) -> None:
        names = [n for n, _ in self.hypotheses]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate hypothesis name in goal: {names}")

    @staticmethod
    def make(hypotheses: Iterable[tuple[str, str]], target: str) -> "Goal":
        """Build a goal, normalizing whitespace in every proposition."""
        return Goal(
            hypotheses=tuple((name, _norm(prop)) for name, prop in hypotheses),
            target=_norm(target),
        )


def canonicalize_state(goals: Sequence[Goal]) -> str:
    """Serialize goals to the canonical text used for deduplication.

    Deterministic and injective on distinct goal lists: goals are joined by
    "\\n---\\n"; within a goal each hypothesis renders as "<name> : <prop>" on
    its own line, then "⊢ <target>". Whitespace inside propositions is
    normalized to single spaces. The empty goal list renders as "" and
    denotes a proved terminal state.
    """
    blocks = []
    for goal in goals:
        lines = [f"{name} : {_norm(prop)}" for name, prop in goal.hypotheses]
        lines.append(f"{TURNSTILE} {_norm(goal.target)}")
        blocks.append("\n".join(lines))
    return "\n---\n".join(blocks)


@dataclass(frozen=True)
class TacticState:
    """An environment-issued proof state.

    state_id is scoped to one environment session and assigned densely from
    0. canonical_text is always the canonical serialization of goals; empty
    goals (and empty text) mean the state is proved.
    """

    state_id: int
    goals: tuple[Goal, ...]
    canonical_text: str = field(default="")

    def __post_init__(self) -> None:
        if self.state_id < 0:
            raise ValueError("state_id must be >= 0")
        expected = canonicalize_state(self.goals)
        if self.canonical_text == "":
            object.__setattr__(self, "canonical_text", expected)
        elif self.canonical_text != expected:
            raise ValueError("canonical_text does not match goals")

    @property
    def is_proved(self) -> bool:
        # canonical_text, not goals: remote states are text-only views
        return self.canonical_text == ""


@dataclass(frozen=True)
class TacticCandidate:
    """A proposed tactic string with its generation statistics.

    logprob is the generator-reported total natural-log probability of the
    tactic string (<= 0); token_count is the generated token count (>= 1).
    The negative-log-probability views used by curation are derived here.
    """

    tactic: str
    logprob: float
    token_count: int = 1

    def __post_init__(self) -> None:
        if self.logprob > 0:
            raise ValueError(f"logprob must be <= 0, got {self.logprob}")
        if self.token_count < 1:
            raise ValueError(f"token_count must be >= 1, got {self.token_count}")

    @property
    def nll_total(self) -> float:
        return -self.logprob

    @property
    def nll_per_token(self) -> float:
        return -self.logprob / self.token_count


class ApplyKind(Enum):
    NEW_STATE = "NewState"
    PROVED = "Proved"
    ERROR = "Error"


@dataclass(frozen=True)
class ApplyOutcome:
    """Result of applying a tactic: a new state, a finished proof, or an error."""

    kind: ApplyKind
    new_state: TacticState | None = None
    error_message: str | None = None

    def __post_init__(self) -> None:
        if self.kind is ApplyKind.NEW_STATE and self.new_state is None:
            raise ValueError("NewState outcome requires new_state")
        if self.kind is not ApplyKind.NEW_STATE and self.new_state is not None:
            raise ValueError(f"{self.kind.value} outcome must not carry a state")
        if self.kind is ApplyKind.ERROR and not self.error_message:
            raise ValueError("Error outcome requires error_message")
        if self.kind is not ApplyKind.ERROR and self.error_message is not None:
            raise ValueError(f"{self.kind.value} outcome must not carry an error")

    @staticmethod
    def new_state_of(state: TacticState) -> "ApplyOutcome":
        return ApplyOutcome(ApplyKind.NEW_STATE, new_state=state)

    @staticmethod
    def proved() -> "ApplyOutcome":
        return ApplyOutcome(ApplyKind.PROVED)

    @staticmethod
    def error(message: str) -> "ApplyOutcome":
        return ApplyOutcome(ApplyKind.ERROR, error_message=message)


@dataclass(frozen=True)
class TrajectoryStep:
    """One (state, tactic) pair with its reward label."""

    state: str  # canonical text of the state the tactic was applied in
    candidate: TacticCandidate
    reward: float

    def __post_init__(self) -> None:
        if self.reward not in (0.0, 1.0):
            raise ValueError(f"reward must be 0 or 1, got {self.reward}")


@dataclass(frozen=True)
class Trajectory:
    """A labeled sequence of (state, tactic) pairs for one theorem.

    Trajectories extracted from found proofs carry reward 1 on every step.
    Reward is stored per step so non-binary schemes need no schema change.
    """

    theorem_id: str
    steps: tuple[TrajectoryStep, ...]

    @property
    def path_logprob_sum(self) -> float:
        return sum(s.candidate.logprob for s in self.steps)


def label_rewards(
    theorem_id: str, proof_path: Sequence[tuple[TacticState, TacticCandidate]]
) -> Trajectory:
    """Label a successful root-to-proof path: every step gets reward 1.

    Raises EmptyPath on an empty path; order is preserved.
    """
    if not proof_path:
        raise EmptyPath("cannot label an empty proof path")
    steps = tuple(
        TrajectoryStep(state=state.canonical_text, candidate=cand, reward=1.0)
        for state, cand in proof_path
    )
    return Trajectory(theorem_id=theorem_id, steps=steps)


# --- trajectory store -------------------------------------------------------
#
# One record per line; field names are part of the on-disk contract:
#   {"theorem_id": ..., "steps": [{"state", "tactic", "logprob",
#                                  "token_count", "reward"}, ...]}


def trajectory_to_record(traj: Trajectory) -> dict:
    return {
        "theorem_id": traj.theorem_id,
        "steps": [
            {
                "state": s.state,
                "tactic": s.candidate.tactic,
                "logprob": s.candidate.logprob,
                "token_count": s.candidate.token_count,
                "reward": s.reward,
            }
            for s in traj.steps
        ],
    }


def trajectory_from_record(record: dict) -> Trajectory:
    steps = tuple(
        TrajectoryStep(
            state=s["state"],
            candidate=TacticCandidate(
                tactic=s["tactic"],
                logprob=s["logprob"],
                token_count=s["token_count"],
            ),
            reward=float(s["reward"]),
        )
        for s in record["steps"]
    )
    return Trajectory(theorem_id=record["theorem_id"], steps=steps)


def write_trajectories(path, trajectories: Iterable[Trajectory], append: bool = False) -> int:
    """Write trajectories to a .jsonl store; returns the record count written."""
    mode = "a" if append else "w"
    count = 0
    with open(path, mode, encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(trajectory_to_record(traj), ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count


def read_trajectories(path) -> list[Trajectory]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(trajectory_from_record(json.loads(line)))
    return out
