"""Best-first proof tree search.

Frontier nodes are scored by length-normalized cumulative log-probability:
path_logprob_sum / depth**alpha, higher is better. alpha defaults to 2.0;
the divisor form penalizes depth sublinearly in cumulative logprob, reducing
the bias toward shallow nodes (this is the single most consequential
interpretation in the repo -- the normalization factor is named but its
formula is not fixed anywhere authoritative). The root scores 0 so it is
always expanded first.

Determinism: ties pop by (smaller depth, smaller node_id); children are
created in candidate sort order; two runs with the same seed, policy, and
environment produce identical results byte for byte.

Transpositions: a child whose canonical state text already appeared in the
tree is created only if its priority strictly exceeds the incumbent's;
otherwise it is discarded and the incumbent keeps its place. When replaced,
an un-expanded incumbent is marked Dead; an already-expanded incumbent keeps
its subtree (the tree is never re-wired, which keeps proof extraction a
parent walk).
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .model import (
    ApplyKind,
    TacticCandidate,
    TacticState,
    Trajectory,
    TrajectoryStep,
    label_rewards,
)
from .policy import EmptyGeneration, GenerationRequest, Policy

__all__ = [
    "NodeStatus",
    "SearchNode",
    "SearchBudget",
    "SearchOutcome",
    "SearchResult",
    "NotProved",
    "SearchAborted",
    "node_priority",
    "run_search",
    "extract_proof",
]


class NotProved(ValueError):
    """extract_proof called on a node that is not Proved."""


class SearchAborted(RuntimeError):
    """The environment failed at the protocol level mid-search."""


class NodeStatus(Enum):
    OPEN = "Open"
    EXPANDED = "Expanded"
    PROVED = "Proved"
    DEAD = "Dead"


@dataclass
class SearchNode:
    """One tree node. state is None only for the synthetic terminal node a
    Proved outcome creates (the environment reports no state for it)."""

    node_id: int
    parent: int | None
    state: TacticState | None
    incoming_tactic: TacticCandidate | None
    depth: int
    path_logprob_sum: float
    priority: float
    status: NodeStatus = NodeStatus.OPEN

    @property
    def state_text(self) -> str:
        return self.state.canonical_text if self.state is not None else ""


@dataclass(frozen=True)
class SearchBudget:
    max_expansions: int
    max_depth: int
    max_wall_ms: int | None = None

    def __post_init__(self) -> None:
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_wall_ms is not None and self.max_wall_ms < 1:
            raise ValueError("max_wall_ms must be >= 1 when present")


class SearchOutcome(Enum):
    PROVED = "Proved"
    EXHAUSTED = "Exhausted"
    BUDGET_EXCEEDED = "BudgetExceeded"


@dataclass(frozen=True)
class SearchSettings:
    """One search configuration: sampling knobs plus the budget."""

    budget: SearchBudget
    width: int = 3
    temperature: float = 1.3
    alpha: float = 2.0


@dataclass
class SearchResult:
    outcome: SearchOutcome
    proof: tuple[TacticCandidate, ...] | None
    expansions_used: int
    trajectory: Trajectory | None
    cancelled: bool = False
    failed_steps: tuple[TrajectoryStep, ...] = ()
    tree: list[SearchNode] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        proved = self.outcome is SearchOutcome.PROVED
        if proved != (self.proof is not None) or proved != (self.trajectory is not None):
            raise ValueError("proof and trajectory must be present iff outcome is Proved")

    def to_record(self) -> dict:
        """Serializable summary; stable field order, no wall-clock content."""
        return {
            "outcome": self.outcome.value,
            "proof": None
            if self.proof is None
            else [
                {"tactic": c.tactic, "logprob": c.logprob, "token_count": c.token_count}
                for c in self.proof
            ],
            "expansions_used": self.expansions_used,
            "cancelled": self.cancelled,
        }


def node_priority(path_logprob_sum: float, depth: int, alpha: float) -> float:
    """Length-normalized score path_logprob_sum / depth**alpha (higher is better)."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return path_logprob_sum / depth**alpha


def extract_proof(tree: Sequence[SearchNode], proved_node_id: int) -> list[TacticCandidate]:
    """Root-to-node incoming tactics, in application order."""
    node = tree[proved_node_id]
    if node.status is not NodeStatus.PROVED:
        raise NotProved(f"node {proved_node_id} has status {node.status.value}")
    tactics: list[TacticCandidate] = []
    while node.parent is not None:
        tactics.append(node.incoming_tactic)
        node = tree[node.parent]
    tactics.reverse()
    return tactics


def _proof_path(
    tree: Sequence[SearchNode], proved_node_id: int
) -> list[tuple[TacticState, TacticCandidate]]:
    """(state the tactic was applied in, tactic) pairs along the proof path."""
    chain: list[SearchNode] = []
    node = tree[proved_node_id]
    while node is not None:
        chain.append(node)
        node = tree[node.parent] if node.parent is not None else None
    chain.reverse()
    return [(chain[i].state, chain[i + 1].incoming_tactic) for i in range(len(chain) - 1)]


def run_search(
    session,
    policy: Policy,
    root: TacticState,
    budget: SearchBudget,
    width: int = 3,
    temperature: float = 1.3,
    alpha: float = 2.0,
    seed: int = 0,
    *,
    cancel: Callable[[], bool] | None = None,
    event_sink: Callable[[dict], None] | None = None,
    collect_failed_steps: bool = False,
    agent_id: int | None = None,
    seq: Callable[[], int] | None = None,
) -> SearchResult:
    """Best-first search from root until proved, exhausted, or out of budget.

    session must expose apply(state_id, tactic) -> ApplyOutcome and a
    theorem_id attribute. One expansion = one policy call; environment calls
    are not budgeted. A cancel callable is polled between expansions (the
    cooperative-sprint stop signal); a cancelled search reports
    BudgetExceeded with cancelled=True, since its budget was cut short from
    outside. Policy EmptyGeneration for a node is treated as a zero-candidate
    expansion; environment protocol failures raise SearchAborted.
    """
    reseed = getattr(policy, "reseed", None)
    if reseed is not None:
        reseed(seed)
    if seq is None:
        counter = itertools.count()
        seq = lambda: next(counter)

    def emit(event: dict) -> None:
        if event_sink is not None:
            event["agent"] = agent_id
            event["seq"] = seq()
            event_sink(event)

    theorem_id = getattr(session, "theorem_id", "unknown")
    if root.is_proved:
        return SearchResult(
            SearchOutcome.PROVED,
            proof=(),
            expansions_used=0,
            trajectory=Trajectory(theorem_id=theorem_id, steps=()),
        )

    tree: list[SearchNode] = [
        SearchNode(
            node_id=0,
            parent=None,
            state=root,
            incoming_tactic=None,
            depth=0,
            path_logprob_sum=0.0,
            priority=0.0,
        )
    ]
    dedup: dict[str, int] = {root.canonical_text: 0}
    heap: list[tuple[float, int, int]] = [(-0.0, 0, 0)]
    expansions = 0
    failed: list[TrajectoryStep] = []
    start = time.monotonic()

    def finish(outcome: SearchOutcome, *, cancelled: bool = False) -> SearchResult:
        return SearchResult(
            outcome,
            proof=None,
            expansions_used=expansions,
            trajectory=None,
            cancelled=cancelled,
            failed_steps=tuple(failed),
            tree=tree,
        )

    while heap:
        if cancel is not None and cancel():
            return finish(SearchOutcome.BUDGET_EXCEEDED, cancelled=True)
        _, _, node_id = heapq.heappop(heap)
        node = tree[node_id]
        if node.status is not NodeStatus.OPEN:
            continue  # replaced by a better transposition while queued
        if node.depth >= budget.max_depth:
            node.status = NodeStatus.DEAD  # frontier leaf; never expandable
            continue
        if expansions >= budget.max_expansions:
            return finish(SearchOutcome.BUDGET_EXCEEDED)
        if (
            budget.max_wall_ms is not None
            and (time.monotonic() - start) * 1000.0 >= budget.max_wall_ms
        ):
            return finish(SearchOutcome.BUDGET_EXCEEDED)

        expansions += 1
        node.status = NodeStatus.EXPANDED
        emit(
            {
                "event": "expand",
                "node": node.node_id,
                "depth": node.depth,
                "priority": node.priority,
            }
        )
        try:
            candidates = policy.generate(
                GenerationRequest(
                    state_text=node.state.canonical_text,
                    num_samples=width,
                    temperature=temperature,
                )
            )
        except EmptyGeneration:
            candidates = []

        for cand in candidates:
            try:
                outcome = session.apply(node.state.state_id, cand.tactic)
            except Exception as exc:  # protocol-level failure, not a tactic error
                raise SearchAborted(f"environment failed: {exc}") from exc

            if outcome.kind is ApplyKind.PROVED:
                child = SearchNode(
                    node_id=len(tree),
                    parent=node.node_id,
                    state=None,
                    incoming_tactic=cand,
                    depth=node.depth + 1,
                    path_logprob_sum=node.path_logprob_sum + cand.logprob,
                    priority=node_priority(
                        node.path_logprob_sum + cand.logprob, node.depth + 1, alpha
                    ),
                    status=NodeStatus.PROVED,
                )
                tree.append(child)
                emit({"event": "proved", "node": child.node_id, "depth": child.depth})
                proof = extract_proof(tree, child.node_id)
                trajectory = label_rewards(theorem_id, _proof_path(tree, child.node_id))
                return SearchResult(
                    SearchOutcome.PROVED,
                    proof=tuple(proof),
                    expansions_used=expansions,
                    trajectory=trajectory,
                    failed_steps=tuple(failed),
                    tree=tree,
                )

            if outcome.kind is ApplyKind.ERROR:
                if collect_failed_steps:
                    failed.append(
                        TrajectoryStep(
                            state=node.state.canonical_text, candidate=cand, reward=0.0
                        )
                    )
                continue

            new_state = outcome.new_state
            depth = node.depth + 1
            path_sum = node.path_logprob_sum + cand.logprob
            priority = node_priority(path_sum, depth, alpha)
            incumbent_id = dedup.get(new_state.canonical_text)
            if incumbent_id is not None and priority <= tree[incumbent_id].priority:
                emit(
                    {
                        "event": "dedup_discard",
                        "parent": node.node_id,
                        "kept_node": incumbent_id,
                        "priority": priority,
                    }
                )
                continue
            child = SearchNode(
                node_id=len(tree),
                parent=node.node_id,
                state=new_state,
                incoming_tactic=cand,
                depth=depth,
                path_logprob_sum=path_sum,
                priority=priority,
            )
            tree.append(child)
            if incumbent_id is not None:
                incumbent = tree[incumbent_id]
                if incumbent.status is NodeStatus.OPEN:
                    incumbent.status = NodeStatus.DEAD
            dedup[new_state.canonical_text] = child.node_id
            heapq.heappush(heap, (-priority, depth, child.node_id))
            emit(
                {
                    "event": "child",
                    "node": child.node_id,
                    "parent": node.node_id,
                    "tactic": cand.tactic,
                    "priority": priority,
                }
            )

    return finish(SearchOutcome.EXHAUSTED)
