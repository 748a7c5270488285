"""Shared subgoal cache: the coordination store for prover agents.

At most one subgoal is active at a time (focused parallelism); all agents
attack it together and the first proof wins. Legal status transitions are
Pending -> Proving -> {Proven, Stuck}; Stuck -> Pending happens only through
a replan that bumps the plan revision. Every mutation happens under one lock
and is appended to a transition log, so linearizability tests can replay
arbitrary interleavings and check the history afterwards.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace

from ..model import TacticCandidate
from .plan import SubgoalEntry, SubgoalPlan, SubgoalStatus

__all__ = ["CacheTransition", "SharedSubgoalCache", "InvalidRefinedPlan"]


class InvalidRefinedPlan(ValueError):
    """A refined plan that breaks replanning monotonicity."""


@dataclass(frozen=True)
class CacheTransition:
    revision: int
    index: int
    name: str
    before: SubgoalStatus | None  # None marks a plan (re)load
    after: SubgoalStatus


class SharedSubgoalCache:
    """Thread-safe store of the plan, the active subgoal, and its stop flag."""

    def __init__(self, plan: SubgoalPlan):
        self._lock = threading.Lock()
        self._plan = plan
        self._cancel = threading.Event()
        self._transitions: list[CacheTransition] = [
            CacheTransition(plan.revision, e.index, e.name, None, e.status)
            for e in plan.entries
        ]

    # -- observers ------------------------------------------------------

    @property
    def plan(self) -> SubgoalPlan:
        with self._lock:
            return self._plan

    @property
    def active_index(self) -> int | None:
        """Index of the first non-Proven entry; None when the plan is done."""
        with self._lock:
            return self._plan.first_unproven

    @property
    def cancellation(self) -> threading.Event:
        return self._cancel

    def entry(self, index: int) -> SubgoalEntry:
        with self._lock:
            return self._plan.entries[index]

    def transitions(self) -> list[CacheTransition]:
        with self._lock:
            return list(self._transitions)

    def all_proven(self) -> bool:
        with self._lock:
            return self._plan.first_unproven is None

    # -- transitions ----------------------------------------------------

    def _move(self, entry: SubgoalEntry, **changes) -> None:
        new = replace(entry, **changes)
        self._plan = self._plan.with_entry(new)
        self._transitions.append(
            CacheTransition(self._plan.revision, new.index, new.name, entry.status, new.status)
        )

    def claim_active(self) -> tuple[int, threading.Event]:
        """Mark the first non-Proven entry Proving and hand back its stop flag.

        The entry must be Pending: claiming an already-Proving, Stuck, or
        finished plan is a coordination bug.
        """
        with self._lock:
            index = self._plan.first_unproven
            if index is None:
                raise RuntimeError("claim_active on a fully proven plan")
            entry = self._plan.entries[index]
            if entry.status is not SubgoalStatus.PENDING:
                raise RuntimeError(
                    f"claim_active: {entry.name} is {entry.status.value}, not Pending"
                )
            self._move(entry, status=SubgoalStatus.PROVING)
            self._cancel = threading.Event()
            return index, self._cancel

    def try_complete(
        self, index: int, proof: tuple[TacticCandidate, ...], prover_id: int
    ) -> bool:
        """Record a proof for the Proving entry; first writer wins.

        Returns True for the winner. Losers (entry already Proven) and calls
        against entries that are not Proving return False without mutating.
        The winner raises the cancellation flag for the other agents.
        """
        with self._lock:
            entry = self._plan.entries[index]
            if entry.status is not SubgoalStatus.PROVING:
                return False
            self._move(
                entry,
                status=SubgoalStatus.PROVEN,
                proof=tuple(proof),
                prover_id=prover_id,
            )
            self._cancel.set()
            return True

    def mark_stuck(self, index: int) -> bool:
        """Proving -> Stuck; a no-op returning False if a proof landed first."""
        with self._lock:
            entry = self._plan.entries[index]
            if entry.status is not SubgoalStatus.PROVING:
                return False
            self._move(entry, status=SubgoalStatus.STUCK)
            return True

    def apply_replan(self, refined: SubgoalPlan) -> None:
        """Swap in a refined plan (revision must increase, Proven set must be
        preserved); the stuck entry returns to Pending inside `refined`."""
        with self._lock:
            if refined.revision <= self._plan.revision:
                raise InvalidRefinedPlan(
                    f"revision must increase: {self._plan.revision} -> {refined.revision}"
                )
            old_proven = {e.pair for e in self._plan.proven_entries}
            new_proven = {e.pair for e in refined.proven_entries}
            if not old_proven <= new_proven:
                raise InvalidRefinedPlan(
                    f"replan lost proven entries: {sorted(old_proven - new_proven)}"
                )
            self._plan = refined
            self._cancel = threading.Event()
            for e in refined.entries:
                self._transitions.append(
                    CacheTransition(refined.revision, e.index, e.name, None, e.status)
                )
