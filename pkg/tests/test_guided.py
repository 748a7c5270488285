"""The planner-guided loop end to end on the toy system."""

import pytest

from stepprover.hierarch import (
    GuidedConfig,
    PlannerUnavailable,
    ScriptedPlanner,
    SubgoalStatus,
    ToyChainPlanner,
    run_planner_guided,
)
from stepprover.model import ApplyKind, Theorem
from stepprover.policy import TabularPolicy
from stepprover.search import SearchBudget, SearchOutcome
from stepprover.toyenv import init_session

POLICY = TabularPolicy(hypothesis_rewrites=True)
CHAIN_THM = Theorem(id="m22", statement="mul (S (S 0)) (S (S 0)) = add (S (S 0)) (S (S 0))")


def guided(theorem, planner, config=None, **kwargs):
    config = config or GuidedConfig(
        pool_size=1, per_subgoal_budget=SearchBudget(200, 6), max_replans=2
    )
    defaults = dict(width=9, temperature=1.0, alpha=0.0, seed=11)
    defaults.update(kwargs)
    return run_planner_guided(theorem, planner, POLICY, init_session, config, **defaults)


def test_chain_plan_proves_and_assembles_flat_proof():
    result = guided(CHAIN_THM, ToyChainPlanner(segment_length=3))
    assert result.outcome is SearchOutcome.PROVED
    assert result.flat_proof_replayed
    assert any(c.tactic.startswith("split_trans ") for c in result.proof)
    # independent replay of the returned flat proof on a fresh session
    session, state = init_session(CHAIN_THM.statement, CHAIN_THM.id)
    for i, cand in enumerate(result.proof):
        outcome = session.apply(state.state_id, cand.tactic)
        assert outcome.kind is not ApplyKind.ERROR, (cand.tactic, outcome.error_message)
        if outcome.kind is ApplyKind.PROVED:
            assert i == len(result.proof) - 1
            break
        state = outcome.new_state
    # trajectory labels the replay path with reward 1 everywhere
    assert all(s.reward == 1.0 for s in result.trajectory.steps)
    assert len(result.trajectory.steps) == len(result.proof)
    # every plan entry carries exactly one recorded proof and a prover id
    for entry in result.plan.entries:
        assert entry.status is SubgoalStatus.PROVEN
        assert entry.proof is not None and entry.prover_id is not None


def test_empty_plan_degenerates_to_monolithic_sprint():
    planner = ScriptedPlanner(["No decomposition needed."])
    easy = Theorem(id="easy", statement="add (S 0) 0 = S 0")
    result = guided(easy, planner)
    assert result.outcome is SearchOutcome.PROVED
    assert result.plan.entries == ()
    assert result.outline.subgoals == ()
    assert [c.tactic for c in result.proof] == ["add_zero", "refl"]
    assert not result.flat_proof_replayed


def test_planner_unavailable_propagates():
    with pytest.raises(PlannerUnavailable):
        guided(CHAIN_THM, ScriptedPlanner([]))


def test_unsolvable_subgoal_exhausts_after_max_replans():
    # the planner insists on a false lemma; every sprint gets stuck and the
    # replanner returns the same plan until the budget runs out
    bad_plan = "```\nhave h1 : S 0 = 0\n```"
    planner = ScriptedPlanner([bad_plan] + ["```\nhave h1 : S 0 = 0\n```"] * 10)
    easy = Theorem(id="easy", statement="add (S 0) 0 = S 0")
    config = GuidedConfig(
        pool_size=1, per_subgoal_budget=SearchBudget(10, 4), max_replans=2
    )
    result = guided(easy, planner, config=config)
    assert result.outcome is SearchOutcome.EXHAUSTED
    assert result.proof is None and result.trajectory is None
    assert result.replans_used == 2
    assert result.expansions_used > 0


def test_expansions_aggregate_across_sprints():
    events = []
    result = guided(CHAIN_THM, ToyChainPlanner(segment_length=3), event_sink=events.append)
    expansions_seen = sum(1 for e in events if e["event"] == "expand")
    assert result.expansions_used == expansions_seen


def test_plan_sink_sees_every_revision():
    snapshots = []
    result = guided(
        CHAIN_THM, ToyChainPlanner(segment_length=3), plan_sink=snapshots.append
    )
    assert result.outcome is SearchOutcome.PROVED
    assert snapshots[0]["revision"] == 0
    assert all(
        e["status"] == "Pending" for e in snapshots[0]["entries"]
    )
    assert all(e["status"] == "Proven" for e in snapshots[-1]["entries"])


def test_final_budget_defaults_to_per_subgoal():
    config = GuidedConfig(pool_size=2, per_subgoal_budget=SearchBudget(77, 5))
    assert config.effective_final_budget == SearchBudget(77, 5)
    explicit = GuidedConfig(
        pool_size=2,
        per_subgoal_budget=SearchBudget(77, 5),
        final_budget=SearchBudget(10, 3),
    )
    assert explicit.effective_final_budget == SearchBudget(10, 3)


def test_guided_with_pool_races_and_still_proves():
    config = GuidedConfig(
        pool_size=4, per_subgoal_budget=SearchBudget(200, 6), max_replans=2
    )
    result = guided(CHAIN_THM, ToyChainPlanner(segment_length=3), config=config)
    assert result.outcome is SearchOutcome.PROVED
    for entry in result.plan.entries:
        assert entry.prover_id in range(4)
