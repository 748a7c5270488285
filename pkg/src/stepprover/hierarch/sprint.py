"""Cooperative sprints: all prover agents attack one subgoal at a time.

Each agent runs an independent best-first search on its own environment
session, seeded seed_base + prover_id. The first proof is written to the
shared cache (first writer wins) and raises the cancellation flag; every
other agent polls the flag between expansions and stops, so at most one
in-flight expansion per agent happens after the win. Single-agent failures
are recorded, not propagated: a sprint dies only when every agent does.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from ..model import TacticState
from ..search import SearchBudget, SearchOutcome, SearchResult, run_search
from .cache import SharedSubgoalCache
from .plan import SubgoalEntry, SubgoalStatus

__all__ = [
    "SprintOutcome",
    "SprintReport",
    "SharedCounter",
    "augment_context",
    "run_cooperative_sprint",
    "run_free_sprint",
]


class SprintOutcome(Enum):
    SUBGOAL_PROVEN = "SubgoalProven"
    SUBGOAL_STUCK = "SubgoalStuck"


class SharedCounter:
    """Monotone event sequence shared by every agent in a sprint."""

    def __init__(self) -> None:
        self._count = itertools.count()
        self._lock = threading.Lock()

    def __call__(self) -> int:
        with self._lock:
            return next(self._count)


@dataclass
class SprintReport:
    outcome: SprintOutcome
    expansions: int
    winner: int | None
    winner_result: SearchResult | None
    agent_results: list[SearchResult | None]
    agent_errors: list[Exception | None]


def augment_context(session, state: TacticState, proven: list[SubgoalEntry]) -> TacticState:
    """Implant proven subgoals as hypotheses, in index order; with nothing
    proven the state is returned unchanged."""
    for entry in sorted(proven, key=lambda e: e.index):
        if entry.status is not SubgoalStatus.PROVEN:
            raise ValueError(f"cannot augment with unproven entry {entry.name}")
        state = session.augment(state.state_id, entry.name, entry.proposition)
    return state


def _run_pool(
    pool_size: int,
    statement: str,
    theorem_id: str,
    context: list[SubgoalEntry],
    env_factory: Callable[[str, str], tuple[object, TacticState]],
    policy,
    budget: SearchBudget,
    width: int,
    temperature: float,
    alpha: float,
    seed_base: int,
    cancel_event: threading.Event,
    on_proof: Callable[[int, SearchResult], None],
    event_sink,
    seq,
) -> tuple[list[SearchResult | None], list[Exception | None]]:
    results: list[SearchResult | None] = [None] * pool_size
    errors: list[Exception | None] = [None] * pool_size
    if seq is None:
        seq = SharedCounter()

    def worker(prover_id: int) -> None:
        try:
            session, root = env_factory(statement, theorem_id)
            try:
                root = augment_context(session, root, context)
                result = run_search(
                    session,
                    policy,
                    root,
                    budget,
                    width=width,
                    temperature=temperature,
                    alpha=alpha,
                    seed=seed_base + prover_id,
                    cancel=cancel_event.is_set,
                    event_sink=event_sink,
                    agent_id=prover_id,
                    seq=seq,
                )
                results[prover_id] = result
                if result.outcome is SearchOutcome.PROVED:
                    on_proof(prover_id, result)
            finally:
                session.close()
        except Exception as exc:  # one agent down must not sink the sprint
            errors[prover_id] = exc

    if pool_size == 1:
        worker(0)  # no thread overhead for the degenerate pool
    else:
        threads = [
            threading.Thread(target=worker, args=(i,), name=f"prover-{i}")
            for i in range(pool_size)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    return results, errors


def run_cooperative_sprint(
    cache: SharedSubgoalCache,
    pool_size: int,
    budget: SearchBudget,
    env_factory: Callable[[str, str], tuple[object, TacticState]],
    policy,
    *,
    width: int = 3,
    temperature: float = 1.3,
    alpha: float = 2.0,
    seed_base: int = 0,
    event_sink=None,
    seq=None,
) -> SprintReport:
    """Claim the cache's active subgoal and throw the whole pool at it.

    The subgoal must be Pending. Context: every already-Proven entry is
    implanted into each agent's session before its search starts. Ends with
    the entry Proven (exactly one recorded proof) or Stuck (all budgets
    exhausted)."""
    index, cancel_event = cache.claim_active()
    plan = cache.plan
    entry = plan.entries[index]
    context = [e for e in plan.entries if e.status is SubgoalStatus.PROVEN]
    winner_result: dict[int, SearchResult] = {}

    def on_proof(prover_id: int, result: SearchResult) -> None:
        if cache.try_complete(index, result.proof, prover_id):
            winner_result[prover_id] = result
            if event_sink is not None:
                event_sink(
                    {
                        "event": "subgoal_proven",
                        "subgoal": index,
                        "agent": prover_id,
                        "seq": seq() if seq is not None else None,
                    }
                )

    results, errors = _run_pool(
        pool_size,
        entry.proposition,
        f"{plan.theorem_id}::{entry.name}",
        context,
        env_factory,
        policy,
        budget,
        width,
        temperature,
        alpha,
        seed_base,
        cancel_event,
        on_proof,
        event_sink,
        seq,
    )
    expansions = sum(r.expansions_used for r in results if r is not None)
    if cache.entry(index).status is SubgoalStatus.PROVEN:
        winner = cache.entry(index).prover_id
        return SprintReport(
            SprintOutcome.SUBGOAL_PROVEN,
            expansions,
            winner,
            winner_result.get(winner),
            results,
            errors,
        )
    if all(e is not None for e in errors):
        # every agent crashed; surface the first failure
        raise errors[0]
    cache.mark_stuck(index)
    return SprintReport(SprintOutcome.SUBGOAL_STUCK, expansions, None, None, results, errors)


def run_free_sprint(
    statement: str,
    theorem_id: str,
    context: list[SubgoalEntry],
    pool_size: int,
    budget: SearchBudget,
    env_factory,
    policy,
    *,
    width: int = 3,
    temperature: float = 1.3,
    alpha: float = 2.0,
    seed_base: int = 0,
    event_sink=None,
    seq=None,
) -> SprintReport:
    """Same first-proof-wins pool, but against an arbitrary statement rather
    than a cache entry; used for the final main-theorem sprint."""
    cancel_event = threading.Event()
    lock = threading.Lock()
    winner: dict[str, object] = {}

    def on_proof(prover_id: int, result: SearchResult) -> None:
        with lock:
            if "id" in winner:
                return
            winner["id"] = prover_id
            winner["result"] = result
        cancel_event.set()
        if event_sink is not None:
            event_sink(
                {
                    "event": "main_proven",
                    "agent": prover_id,
                    "seq": seq() if seq is not None else None,
                }
            )

    results, errors = _run_pool(
        pool_size,
        statement,
        theorem_id,
        context,
        env_factory,
        policy,
        budget,
        width,
        temperature,
        alpha,
        seed_base,
        cancel_event,
        on_proof,
        event_sink,
        seq,
    )
    expansions = sum(r.expansions_used for r in results if r is not None)
    if "id" in winner:
        return SprintReport(
            SprintOutcome.SUBGOAL_PROVEN,
            expansions,
            winner["id"],  # type: ignore[arg-type]
            winner["result"],  # type: ignore[arg-type]
            results,
            errors,
        )
    if all(e is not None for e in errors):
        raise errors[0]
    return SprintReport(SprintOutcome.SUBGOAL_STUCK, expansions, None, None, results, errors)
