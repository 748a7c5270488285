"""Shared test machinery: randomized cache schedules and sprint event audits."""

from __future__ import annotations

import random
from collections import Counter

from stepprover.hierarch import (
    SharedSubgoalCache,
    SubgoalEntry,
    SubgoalPlan,
    SubgoalStatus,
)
from stepprover.model import TacticCandidate

_ORDER = {
    SubgoalStatus.PENDING: 0,
    SubgoalStatus.PROVING: 1,
    SubgoalStatus.PROVEN: 2,
    SubgoalStatus.STUCK: 2,
}


def run_random_schedule(seed: int) -> SharedSubgoalCache:
    """Drive one cache through a randomized interleaving of worker operations
    (claims, racing completions, stuck markings, replans) until every entry
    is Proven; invariants are asserted by audit_cache afterwards."""
    rng = random.Random(seed)
    size = rng.randint(1, 3)
    entries = tuple(SubgoalEntry(i, f"h{i + 1}", f"a{i} = a{i + 1}") for i in range(size))
    cache = SharedSubgoalCache(SubgoalPlan("sched", entries))
    stalls = 0
    while not cache.all_proven():
        index, _flag = cache.claim_active()
        ops: list[tuple[str, int]] = []
        workers = rng.randint(1, 4)
        for worker in range(workers):
            if rng.random() < 0.7 or stalls > 3:
                ops.append(("complete", worker))
        ops.append(("stuck", -1))
        if stalls > 3:
            ops.sort(key=lambda op: op[0] != "complete")  # force progress
        else:
            rng.shuffle(ops)
        wins = []
        for op, worker in ops:
            if op == "complete":
                won = cache.try_complete(
                    index, (TacticCandidate("refl", -0.1),), worker
                )
                if won:
                    wins.append(worker)
            else:
                cache.mark_stuck(index)
        assert len(wins) <= 1, f"multiple winners on subgoal {index}: {wins}"
        entry = cache.entry(index)
        if entry.status is SubgoalStatus.STUCK:
            stalls += 1
            refined = _random_refinement(rng, cache.plan, index)
            cache.apply_replan(refined)
        else:
            stalls = 0
            assert entry.status is SubgoalStatus.PROVEN
            assert entry.prover_id == wins[0]
    return cache


def _random_refinement(rng: random.Random, plan: SubgoalPlan, stuck_index: int) -> SubgoalPlan:
    """A valid refined plan: maybe one new Pending entry right before the
    stuck one, which resets to Pending; everything else carries over."""
    new_entries: list[SubgoalEntry] = []
    for entry in plan.entries:
        if entry.index == stuck_index:
            if rng.random() < 0.5:
                new_entries.append(
                    SubgoalEntry(
                        len(new_entries), f"r{plan.revision + 1}_{stuck_index}", "x = y"
                    )
                )
            new_entries.append(
                SubgoalEntry(len(new_entries), entry.name, entry.proposition)
            )
        else:
            new_entries.append(
                SubgoalEntry(
                    len(new_entries),
                    entry.name,
                    entry.proposition,
                    entry.status,
                    entry.proof,
                    entry.prover_id,
                )
            )
    return SubgoalPlan(plan.theorem_id, tuple(new_entries), plan.revision + 1)


def audit_cache(cache: SharedSubgoalCache) -> None:
    """Assert the transition history is legal:
    - within a revision, statuses only move forward
      (Pending -> Proving -> {Proven, Stuck});
    - each (name, proposition) pair is proven at most once, ever;
    - the Proven set never shrinks across revisions."""
    per_entry_status: dict[tuple[int, str], SubgoalStatus] = {}
    proven_pairs: Counter = Counter()
    proven_by_revision: dict[int, set[str]] = {}
    for tr in cache.transitions():
        key = (tr.revision, tr.name)
        if tr.before is None:
            # plan load: carried status must not regress a proven entry
            pass
        else:
            held = per_entry_status.get(key)
            assert held == tr.before, f"{tr}: expected {held}, saw {tr.before}"
            assert _ORDER[tr.after] >= _ORDER[tr.before], f"backward move: {tr}"
            assert tr.before is not SubgoalStatus.PROVEN, f"left Proven: {tr}"
        per_entry_status[key] = tr.after
        if tr.after is SubgoalStatus.PROVEN and tr.before is not None:
            proven_pairs[tr.name] += 1
        proven_by_revision.setdefault(tr.revision, set())
        if tr.after is SubgoalStatus.PROVEN:
            proven_by_revision[tr.revision].add(tr.name)
    for name, count in proven_pairs.items():
        assert count == 1, f"{name} proven {count} times"
    revisions = sorted(proven_by_revision)
    for earlier, later in zip(revisions, revisions[1:]):
        missing = proven_by_revision[earlier] - proven_by_revision[later]
        assert not missing, f"revision {later} lost proven entries {missing}"


def post_landing_expansions(events: list[dict]) -> Counter:
    """Per-agent expansions after the first proof landed in the cache."""
    landings = [e["seq"] for e in events if e["event"] in ("subgoal_proven", "main_proven")]
    if not landings:
        return Counter()
    first = min(landings)
    winner = next(e["agent"] for e in events if e.get("seq") == first)
    extra: Counter = Counter()
    for event in events:
        if (
            event["event"] == "expand"
            and event["seq"] > first
            and event["agent"] != winner
        ):
            extra[event["agent"]] += 1
    return extra
