"""The full planner-guided loop: plan, prove subgoals in order, replan when
stuck, finish with a sprint on the main theorem under the proven context.

The result aggregates expansions across every sprint and replanning round.
On success the proof is assembled two ways:

  * chain assembly -- when the plan links the theorem's left side to its
    right side through intermediate terms, the subgoal proofs interleave
    with split_trans introductions into one flat tactic list, which is
    replayed on a fresh session before it is trusted;
  * outline -- otherwise (or when replay fails, e.g. a subgoal proof used a
    context hypothesis), the result carries the final sprint's main proof,
    valid under the augmented context, plus the ordered outline of
    (subgoal, its proof) pairs for downstream assembly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..model import ApplyKind, TacticCandidate, Theorem, label_rewards
from ..search import SearchBudget, SearchOutcome, SearchResult
from ..toyenv.terms import parse_equation
from .cache import SharedSubgoalCache
from .plan import SubgoalPlan, plan_to_record
from .planner import (
    NoSubgoalsParsed,
    Planner,
    ReplanLimitExceeded,
    plan_initial,
    replan,
)
from .sprint import SprintOutcome, run_cooperative_sprint, run_free_sprint

__all__ = ["GuidedConfig", "ProofOutline", "GuidedResult", "run_planner_guided"]


@dataclass(frozen=True)
class GuidedConfig:
    pool_size: int = 4
    per_subgoal_budget: SearchBudget = SearchBudget(max_expansions=100, max_depth=8)
    final_budget: SearchBudget | None = None  # defaults to per_subgoal_budget
    max_replans: int = 3

    @property
    def effective_final_budget(self) -> SearchBudget:
        return self.final_budget or self.per_subgoal_budget


@dataclass(frozen=True)
class ProofOutline:
    """Ordered (name, proposition, tactics) per subgoal, then the main proof."""

    subgoals: tuple[tuple[str, str, tuple[TacticCandidate, ...]], ...]
    main_proof: tuple[TacticCandidate, ...]


@dataclass
class GuidedResult(SearchResult):
    plan: SubgoalPlan | None = None
    outline: ProofOutline | None = None
    replans_used: int = 0
    flat_proof_replayed: bool = False
    cache_transitions: int = 0


def _chain_assembly(
    theorem: Theorem, plan: SubgoalPlan, env_factory
) -> tuple[tuple[TacticCandidate, ...], object] | None:
    """Flatten a chain-shaped plan into one split_trans-based tactic list and
    replay it; returns (tactics, trajectory) only if the replay proves the
    theorem on a fresh, hypothesis-free session."""
    try:
        goal_lhs, goal_rhs = parse_equation(theorem.statement)
        links = [parse_equation(e.proposition) for e in plan.entries]
    except ValueError:
        return None
    if not links or links[0][0] != goal_lhs or links[-1][1] != goal_rhs:
        return None
    if any(links[i][1] != links[i + 1][0] for i in range(len(links) - 1)):
        return None
    if any(e.proof is None for e in plan.entries):
        return None

    from ..toyenv.terms import print_term  # toy-only assembly

    tactics: list[TacticCandidate] = []
    for i, entry in enumerate(plan.entries):
        if i < len(plan.entries) - 1:
            tactics.append(
                TacticCandidate(tactic=f"split_trans {print_term(links[i][1])}", logprob=0.0)
            )
        tactics.extend(entry.proof)

    # replay: the assembly must close the theorem with no context at all
    session, state = env_factory(theorem.statement, theorem.id)
    try:
        path = []
        for cand in tactics:
            outcome = session.apply(state.state_id, cand.tactic)
            if outcome.kind is ApplyKind.ERROR:
                return None
            path.append((state, cand))
            if outcome.kind is ApplyKind.PROVED:
                if cand is not tactics[-1]:
                    return None
                return tuple(tactics), label_rewards(theorem.id, path)
            state = outcome.new_state
        return None
    finally:
        session.close()


def run_planner_guided(
    theorem: Theorem,
    planner: Planner,
    policy,
    env_factory: Callable[[str, str], tuple[object, object]],
    config: GuidedConfig,
    *,
    width: int = 3,
    temperature: float = 1.3,
    alpha: float = 2.0,
    seed: int = 0,
    event_sink=None,
    plan_sink: Callable[[dict], None] | None = None,
) -> GuidedResult:
    """Plan, prove each subgoal with a cooperative sprint (replanning on
    Stuck), then prove the main theorem under the full proven context.

    A planner that proposes nothing degenerates to a single monolithic
    sprint. Exceeding max_replans yields Exhausted with the partial plan
    attached for diagnostics.
    """
    session, root = env_factory(theorem.statement, theorem.id)
    root_text = root.canonical_text
    session.close()

    try:
        plan = plan_initial(planner, theorem.statement, root_text, theorem_id=theorem.id)
    except NoSubgoalsParsed:
        plan = SubgoalPlan(theorem_id=theorem.id, entries=(), revision=0)
    cache = SharedSubgoalCache(plan)
    if plan_sink is not None:
        plan_sink(plan_to_record(plan))

    total_expansions = 0
    replans_used = 0
    sprint_index = 0

    def exhausted() -> GuidedResult:
        return GuidedResult(
            SearchOutcome.EXHAUSTED,
            proof=None,
            expansions_used=total_expansions,
            trajectory=None,
            plan=cache.plan,
            replans_used=replans_used,
            cache_transitions=len(cache.transitions()),
        )

    while not cache.all_proven():
        index = cache.active_index
        report = run_cooperative_sprint(
            cache,
            config.pool_size,
            config.per_subgoal_budget,
            env_factory,
            policy,
            width=width,
            temperature=temperature,
            alpha=alpha,
            seed_base=seed + 1000 * sprint_index,
            event_sink=event_sink,
        )
        sprint_index += 1
        total_expansions += report.expansions
        if report.outcome is SprintOutcome.SUBGOAL_STUCK:
            if replans_used >= config.max_replans:
                return exhausted()
            replans_used += 1
            try:
                refined = replan(
                    planner, theorem.statement, cache.plan, index, config.max_replans
                )
            except ReplanLimitExceeded:
                return exhausted()
            cache.apply_replan(refined)
            if plan_sink is not None:
                plan_sink(plan_to_record(refined))

    final_plan = cache.plan
    if plan_sink is not None:
        plan_sink(plan_to_record(final_plan))

    main = run_free_sprint(
        theorem.statement,
        theorem.id,
        list(final_plan.proven_entries),
        config.pool_size,
        config.effective_final_budget,
        env_factory,
        policy,
        width=width,
        temperature=temperature,
        alpha=alpha,
        seed_base=seed + 1000 * sprint_index,
        event_sink=event_sink,
    )
    total_expansions += main.expansions
    if main.outcome is not SprintOutcome.SUBGOAL_PROVEN:
        return exhausted()

    main_proof = main.winner_result.proof
    outline = ProofOutline(
        subgoals=tuple(
            (e.name, e.proposition, e.proof) for e in final_plan.entries
        ),
        main_proof=main_proof,
    )
    assembled = (
        _chain_assembly(theorem, final_plan, env_factory) if final_plan.entries else None
    )
    transitions = len(cache.transitions())
    if assembled is not None:
        flat, trajectory = assembled
        return GuidedResult(
            SearchOutcome.PROVED,
            proof=flat,
            expansions_used=total_expansions,
            trajectory=trajectory,
            plan=final_plan,
            outline=outline,
            replans_used=replans_used,
            flat_proof_replayed=True,
            cache_transitions=transitions,
        )
    return GuidedResult(
        SearchOutcome.PROVED,
        proof=main_proof,
        expansions_used=total_expansions,
        trajectory=main.winner_result.trajectory,
        plan=final_plan,
        outline=outline,
        replans_used=replans_used,
        flat_proof_replayed=False,
        cache_transitions=transitions,
    )
