"""Canonical serialization, reward labeling, and the trajectory store."""

import pytest
from hypothesis import given, strategies as st

from stepprover.model import (
    EmptyPath,
    Goal,
    TacticCandidate,
    TacticState,
    Theorem,
    Trajectory,
    TrajectoryStep,
    canonicalize_state,
    label_rewards,
    read_trajectories,
    trajectory_from_record,
    trajectory_to_record,
    write_trajectories,
)

prop_st = st.text(
    alphabet=st.sampled_from("0Sadmu() ="), min_size=1, max_size=12
).map(lambda s: s.strip() or "0")


def goal_st():
    names = st.lists(
        st.text(alphabet="hxyz123", min_size=1, max_size=3), max_size=3, unique=True
    )
    return names.flatmap(
        lambda ns: st.tuples(
            st.tuples(*[st.tuples(st.just(n), prop_st) for n in ns]) if ns else st.just(()),
            prop_st,
        )
    ).map(lambda pair: Goal.make(pair[0], pair[1]))


def test_canonicalize_examples():
    assert canonicalize_state([]) == ""
    assert canonicalize_state([Goal.make((), "S 0 = S 0")]) == "⊢ S 0 = S 0"
    # whitespace runs collapse
    assert canonicalize_state([Goal.make((), "S  0 =  S 0")]) == "⊢ S 0 = S 0"


def test_canonicalize_layout():
    goals = [
        Goal.make((("h1", "add 0 0 = 0"), ("h2", "S 0 = S 0")), "0 = 0"),
        Goal.make((), "S 0 = S 0"),
    ]
    assert canonicalize_state(goals) == (
        "h1 : add 0 0 = 0\nh2 : S 0 = S 0\n⊢ 0 = 0\n---\n⊢ S 0 = S 0"
    )


def test_canonicalize_deterministic():
    goals = [Goal.make((("h", "0 = 0"),), "S 0 = S 0")]
    assert canonicalize_state(goals) == canonicalize_state(goals)


@given(st.lists(goal_st(), max_size=3), st.lists(goal_st(), max_size=3))
def test_canonicalize_injective(goals_a, goals_b):
    if canonicalize_state(goals_a) == canonicalize_state(goals_b):
        assert list(goals_a) == list(goals_b)


def test_goal_duplicate_hypothesis_names_rejected():
    with pytest.raises(ValueError):
        Goal.make((("h", "0 = 0"), ("h", "S 0 = S 0")), "0 = 0")


def test_theorem_validation():
    with pytest.raises(ValueError):
        Theorem(id="", statement="0 = 0")
    with pytest.raises(ValueError):
        Theorem(id="t", statement="   ")


def test_tactic_state_proved_iff_no_goals():
    assert TacticState(state_id=0, goals=()).is_proved
    assert not TacticState(state_id=0, goals=(Goal.make((), "0 = 0"),)).is_proved


def test_tactic_candidate_invariants():
    cand = TacticCandidate(tactic="refl", logprob=-2.0, token_count=4)
    assert cand.nll_total == 2.0
    assert cand.nll_per_token == 0.5
    with pytest.raises(ValueError):
        TacticCandidate(tactic="refl", logprob=0.5)
    with pytest.raises(ValueError):
        TacticCandidate(tactic="refl", logprob=-1.0, token_count=0)


def _path(n):
    state = TacticState(state_id=0, goals=(Goal.make((), "S 0 = S 0"),))
    cand = TacticCandidate(tactic="refl", logprob=-0.1)
    return [(state, cand)] * n


def test_label_rewards_all_ones():
    traj = label_rewards("t", _path(3))
    assert [s.reward for s in traj.steps] == [1.0, 1.0, 1.0]
    assert label_rewards("t", _path(1)).steps[0].reward == 1.0


def test_label_rewards_preserves_order():
    state = TacticState(state_id=0, goals=(Goal.make((), "S 0 = S 0"),))
    path = [
        (state, TacticCandidate(tactic="add_zero", logprob=-0.2)),
        (state, TacticCandidate(tactic="refl", logprob=-0.1)),
    ]
    traj = label_rewards("t", path)
    assert [s.candidate.tactic for s in traj.steps] == ["add_zero", "refl"]


def test_label_rewards_empty_path():
    with pytest.raises(EmptyPath):
        label_rewards("t", [])


def test_trajectory_store_roundtrip(tmp_path):
    traj = Trajectory(
        theorem_id="toy-0001",
        steps=(
            TrajectoryStep(
                state="⊢ add (S 0) 0 = S 0",
                candidate=TacticCandidate(tactic="add_zero", logprob=-0.25, token_count=2),
                reward=1.0,
            ),
            TrajectoryStep(
                state="⊢ S 0 = S 0",
                candidate=TacticCandidate(tactic="refl", logprob=-0.1),
                reward=1.0,
            ),
        ),
    )
    path = tmp_path / "store.jsonl"
    assert write_trajectories(path, [traj]) == 1
    assert read_trajectories(path) == [traj]
    # the on-disk field names are a contract
    record = trajectory_to_record(traj)
    assert set(record) == {"theorem_id", "steps"}
    assert set(record["steps"][0]) == {"state", "tactic", "logprob", "token_count", "reward"}
    assert trajectory_from_record(record) == traj


def test_trajectory_store_append(tmp_path):
    traj = label_rewards("a", _path(1))
    path = tmp_path / "store.jsonl"
    write_trajectories(path, [traj])
    write_trajectories(path, [traj], append=True)
    assert len(read_trajectories(path)) == 2
