"""Tactic-generation contract and its implementations.

A policy maps a state's canonical text to a ranked list of TacticCandidates:
at most num_samples of them, deduplicated by tactic string, sorted by logprob
descending with lexicographic tie-breaks. Implementations must be safely
callable from many worker threads at once.

Three implementations ship in-tree:
  ScriptedPolicy -- a fixed lookup table, for deterministic tests.
  TabularPolicy  -- a smoothed count table over the toy tactic alphabet; the
                    desk-scale stand-in that lets the whole expert-iteration
                    loop run without any model server.
  RemotePolicy   -- client for a generation server speaking the POST
                    /generate wire schema.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import requests

from .model import TacticCandidate, Trajectory
from .toyenv.terms import (
    BASE_TACTICS,
    parse_equation_cached,
    rewrite_equation,
    substitution_rule,
)

__all__ = [
    "GenerationRequest",
    "Policy",
    "ScriptedPolicy",
    "TabularPolicy",
    "RemotePolicy",
    "fit_table",
    "PolicyUnavailable",
    "EmptyGeneration",
    "SchemaViolation",
    "EmptyTrainingSet",
    "finalize_candidates",
    "feature_of_state",
]


class PolicyUnavailable(RuntimeError):
    """The generator cannot be reached (after retries, for remote policies)."""


class EmptyGeneration(RuntimeError):
    """The generator produced no candidates for a state."""


class SchemaViolation(ValueError):
    """A remote response does not satisfy the candidate wire schema."""


class EmptyTrainingSet(ValueError):
    """fit_table called with no trajectories."""


@dataclass(frozen=True)
class GenerationRequest:
    """What to generate: the state text, the expansion width, the temperature."""

    state_text: str
    num_samples: int
    temperature: float

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


class Policy(Protocol):
    def generate(self, request: GenerationRequest) -> list[TacticCandidate]: ...


def finalize_candidates(
    raw: Iterable[TacticCandidate], num_samples: int
) -> list[TacticCandidate]:
    """Enforce the generation contract on a raw candidate list.

    Deduplicates by exact tactic string (keeping the highest-logprob copy),
    sorts by logprob descending with ties broken lexicographically by tactic,
    and truncates to num_samples. Raises EmptyGeneration when nothing is left.
    """
    best: dict[str, TacticCandidate] = {}
    for cand in raw:
        held = best.get(cand.tactic)
        if held is None or cand.logprob > held.logprob:
            best[cand.tactic] = cand
    ranked = sorted(best.values(), key=lambda c: (-c.logprob, c.tactic))
    if not ranked:
        raise EmptyGeneration("generator produced no candidates")
    return ranked[:num_samples]


def feature_of_state(state_text: str) -> str:
    """The first goal's target with hypotheses stripped; "" for proved states."""
    if not state_text:
        return ""
    first_goal = state_text.split("\n---\n", 1)[0]
    for line in first_goal.splitlines():
        if line.startswith("⊢ "):
            return line[2:]
    return first_goal


@dataclass(frozen=True)
class ScriptedPolicy:
    """Fixed state-text -> candidates table; raises EmptyGeneration off-script."""

    table: Mapping[str, Sequence[tuple[str, float, int]]]

    def generate(self, request: GenerationRequest) -> list[TacticCandidate]:
        rows = self.table.get(request.state_text)
        if not rows:
            raise EmptyGeneration(f"no scripted candidates for {request.state_text!r}")
        raw = [TacticCandidate(tactic=t, logprob=lp, token_count=tc) for t, lp, tc in rows]
        return finalize_candidates(raw, request.num_samples)


def _normalize(scores: Mapping[str, float]) -> dict[str, float]:
    total = sum(scores.values())
    return {k: v / total for k, v in scores.items()}


@dataclass(frozen=True)
class TabularPolicy:
    """Smoothed conditional counts over the toy tactic alphabet.

    The feature key is the first goal's target (hypotheses stripped);
    p(tactic | key) = (count + alpha) / (sum counts + alpha * |alphabet|),
    sharpened as p^(1/T) and renormalized at generation time. A table with no
    counts is the uniform policy.

    With hypothesis_rewrites enabled, generation additionally offers
    "rw <name>" for every hypothesis whose left side occurs in the first
    goal's equation, giving that group a fixed rw_share of the probability
    mass (split evenly) and scaling the base distribution by the rest. States
    without applicable hypotheses are unaffected, so the base contract (sum
    to 1 over the fixed alphabet) still holds wherever it is observable.

    Immutable: fitting produces a new table, so concurrent readers never see
    partial updates.
    """

    counts: Mapping[tuple[str, str], int] = field(default_factory=dict)
    smoothing_alpha: float = 1.0
    alphabet: tuple[str, ...] = BASE_TACTICS
    hypothesis_rewrites: bool = False
    rw_share: float = 0.5

    def __post_init__(self) -> None:
        if self.smoothing_alpha <= 0:
            raise ValueError("smoothing_alpha must be > 0")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be >= 0")

    def distribution(self, feature: str, temperature: float = 1.0) -> dict[str, float]:
        scores = {
            t: self.counts.get((feature, t), 0) + self.smoothing_alpha
            for t in self.alphabet
        }
        probs = _normalize(scores)
        if temperature != 1.0:
            probs = _normalize({t: p ** (1.0 / temperature) for t, p in probs.items()})
        return probs

    def _applicable_rewrites(self, state_text: str) -> list[str]:
        first_goal = state_text.split("\n---\n", 1)[0]
        target = feature_of_state(state_text)
        try:
            goal_eq = parse_equation_cached(target)
        except ValueError:
            return []
        names = []
        for line in first_goal.splitlines():
            if line.startswith("⊢ ") or " : " not in line:
                continue
            name, prop = line.split(" : ", 1)
            try:
                source, dest = parse_equation_cached(prop)
            except ValueError:
                continue
            if rewrite_equation(goal_eq, substitution_rule(source, dest)) is not None:
                names.append(f"rw {name}")
        return names

    def generate(self, request: GenerationRequest) -> list[TacticCandidate]:
        feature = feature_of_state(request.state_text)
        probs = self.distribution(feature, request.temperature)
        if self.hypothesis_rewrites:
            rewrites = self._applicable_rewrites(request.state_text)
            if rewrites:
                probs = {t: p * (1.0 - self.rw_share) for t, p in probs.items()}
                for tactic in rewrites:
                    probs[tactic] = self.rw_share / len(rewrites)
        raw = [
            TacticCandidate(
                tactic=t, logprob=math.log(p), token_count=max(1, len(t.split()))
            )
            for t, p in probs.items()
        ]
        return finalize_candidates(raw, request.num_samples)

    def updated(
        self, pairs: Iterable[tuple[str, str]], feature_extractor=feature_of_state
    ) -> "TabularPolicy":
        """New table with one extra count per (state_text, tactic) pair."""
        counts = dict(self.counts)
        for state_text, tactic in pairs:
            key = (feature_extractor(state_text), tactic)
            counts[key] = counts.get(key, 0) + 1
        return TabularPolicy(
            counts=counts,
            smoothing_alpha=self.smoothing_alpha,
            alphabet=self.alphabet,
            hypothesis_rewrites=self.hypothesis_rewrites,
            rw_share=self.rw_share,
        )


def fit_table(
    trajectories: Sequence[Trajectory],
    smoothing_alpha: float = 1.0,
    alphabet: tuple[str, ...] = BASE_TACTICS,
    hypothesis_rewrites: bool = False,
) -> TabularPolicy:
    """Fit a fresh count table from trajectories (one count per step)."""
    if not trajectories:
        raise EmptyTrainingSet("fit_table needs at least one trajectory")
    pairs = [
        (step.state, step.candidate.tactic) for traj in trajectories for step in traj.steps
    ]
    empty = TabularPolicy(
        counts={},
        smoothing_alpha=smoothing_alpha,
        alphabet=alphabet,
        hypothesis_rewrites=hypothesis_rewrites,
    )
    return empty.updated(pairs)


@dataclass
class RemotePolicy:
    """Client for a generation server: POST {endpoint}/generate with
    {"state", "n", "temperature"}, expecting {"candidates": [{"tactic",
    "logprob", "tokens"}, ...]}. Retries transport failures with exponential
    backoff (3 attempts, 200 ms base, doubling); schema violations are not
    retried because a malformed server will not heal on its own.
    """

    endpoint: str
    timeout_s: float = 30.0
    attempts: int = 3
    backoff_base_s: float = 0.2

    def generate(self, request: GenerationRequest) -> list[TacticCandidate]:
        payload = {
            "state": request.state_text,
            "n": request.num_samples,
            "temperature": request.temperature,
        }
        url = self.endpoint.rstrip("/") + "/generate"
        last_error: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            try:
                response = requests.post(url, json=payload, timeout=self.timeout_s)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = PolicyUnavailable(f"server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise PolicyUnavailable(
                    f"generation endpoint returned {response.status_code}"
                )
            return finalize_candidates(
                _parse_candidates(response.json()), request.num_samples
            )
        raise PolicyUnavailable(f"generation endpoint unreachable: {last_error}")


def _parse_candidates(body) -> list[TacticCandidate]:
    if not isinstance(body, dict) or not isinstance(body.get("candidates"), list):
        raise SchemaViolation("response must be an object with a candidates list")
    out = []
    for item in body["candidates"]:
        if not isinstance(item, dict):
            raise SchemaViolation(f"candidate must be an object, got {type(item).__name__}")
        tactic = item.get("tactic")
        logprob = item.get("logprob")
        tokens = item.get("tokens")
        if not isinstance(tactic, str) or not tactic:
            raise SchemaViolation("candidate tactic must be a nonempty string")
        if not isinstance(logprob, (int, float)) or logprob > 0:
            raise SchemaViolation(f"candidate logprob must be a number <= 0, got {logprob!r}")
        if not isinstance(tokens, int) or tokens < 1:
            raise SchemaViolation(f"candidate tokens must be an integer >= 1, got {tokens!r}")
        out.append(TacticCandidate(tactic=tactic, logprob=float(logprob), token_count=tokens))
    return out
