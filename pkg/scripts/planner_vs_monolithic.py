#!/usr/bin/env python3
"""Attempts comparison: a theorem the monolithic search cannot crack inside
its budget falls quickly once the planner decomposes it and replans around
stuck links.

    python scripts/planner_vs_monolithic.py
    python scripts/planner_vs_monolithic.py --statement "mul (S (S 0)) (S (S 0)) = add (S (S 0)) (S (S 0))"
"""

import argparse

from stepprover.hierarch import GuidedConfig, ToyChainPlanner, run_planner_guided
from stepprover.model import Theorem
from stepprover.policy import TabularPolicy
from stepprover.search import SearchBudget, SearchOutcome, run_search
from stepprover.toyenv import init_session

DEFAULT = "mul (S (S (S 0))) (S (S (S 0))) = S (S (S (S (S (S (S (S (S 0))))))))"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--statement", default=DEFAULT)
    parser.add_argument("--budget", type=int, default=500)
    parser.add_argument("--seed", type=int, default=101)
    parser.add_argument("--segment-length", type=int, default=5)
    args = parser.parse_args()

    theorem = Theorem(id="demo", statement=args.statement)
    policy = TabularPolicy(hypothesis_rewrites=True)

    session, root = init_session(theorem.statement, theorem.id)
    mono = run_search(
        session, policy, root, SearchBudget(args.budget, 18),
        width=9, temperature=1.0, alpha=0.0, seed=args.seed,
    )
    print(f"monolithic: {mono.outcome.value} after {mono.expansions_used} expansions")

    config = GuidedConfig(
        pool_size=1,
        per_subgoal_budget=SearchBudget(24, 7),
        final_budget=SearchBudget(32, 8),
        max_replans=4,
    )
    guided = run_planner_guided(
        theorem,
        ToyChainPlanner(segment_length=args.segment_length, replan_segment_length=1),
        policy, init_session, config,
        width=9, temperature=1.0, alpha=0.0, seed=args.seed,
    )
    print(
        f"planner-guided: {guided.outcome.value} after {guided.expansions_used} "
        f"expansions ({guided.replans_used} replans)"
    )
    if guided.outcome is SearchOutcome.PROVED:
        print("\nsubgoal plan:")
        for name, prop, proof in guided.outline.subgoals:
            print(f"  {name} : {prop}")
            print(f"      by {'; '.join(c.tactic for c in proof)}")
        print("main proof:", "; ".join(c.tactic for c in guided.outline.main_proof))
        if guided.flat_proof_replayed:
            print("\nflat replayable script:")
            for cand in guided.proof:
                print(f"  {cand.tactic}")


if __name__ == "__main__":
    main()
