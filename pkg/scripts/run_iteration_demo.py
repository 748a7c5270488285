#!/usr/bin/env python3
"""Expert-iteration demo: watch the tabular policy improve on a toy corpus,
then force a plateau and watch the soft reset re-curate and recover.

    python scripts/run_iteration_demo.py --rounds 6 --reset-at 3
"""

import argparse
import tempfile
import warnings

from stepprover.curation import IterationConfig, run_expert_iteration
from stepprover.policy import TabularPolicy
from stepprover.search import SearchBudget, SearchSettings
from stepprover.toyenv import generate_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--corpus-size", type=int, default=200)
    parser.add_argument("--rounds", type=int, default=6)
    parser.add_argument("--expansions", type=int, default=45)
    parser.add_argument("--depth", type=int, default=10)
    parser.add_argument("--reset-at", type=int, default=None,
                        help="inject a plateau after this many rounds")
    parser.add_argument("--out", default=None, help="round artifact directory")
    args = parser.parse_args()

    corpus = generate_corpus(args.seed, args.corpus_size)
    settings = SearchSettings(
        budget=SearchBudget(args.expansions, args.depth),
        width=7, temperature=0.7, alpha=0.0,
    )
    detector = None
    if args.reset_at is not None:
        detector = lambda history: len(history) == args.reset_at
    config = IterationConfig(
        search=settings, eval_fraction=0.25, workers=4, plateau_detector=detector
    )
    out_dir = args.out or tempfile.mkdtemp(prefix="iteration-demo-")
    print(f"corpus {len(corpus)} theorems, artifacts in {out_dir}\n")
    print(f"{'round':>5} {'train':>7} {'eval':>7} {'kept':>6} {'lo':>5} {'hi':>5}  reset")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports = run_expert_iteration(
            corpus, TabularPolicy(), args.rounds, config, out_dir, seed=args.seed
        )
    for r in reports:
        print(
            f"{r.round_index:>5} {r.solve_rate:>7.3f} {r.eval_solve_rate:>7.3f} "
            f"{r.kept_steps:>6} {r.dropped_low:>5} {r.dropped_high:>5}  "
            f"{'<- soft reset' if r.soft_reset else ''}"
        )


if __name__ == "__main__":
    main()
