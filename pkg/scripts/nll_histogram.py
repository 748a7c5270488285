#!/usr/bin/env python3
"""ASCII histogram of tactic NLL over a trajectory store, with the keep band.

    python scripts/nll_histogram.py runs/iterate-*/round_002.jsonl
"""

import argparse

from stepprover.curation import (
    FilterConfig,
    NllStatistic,
    compute_nll_stats,
    filter_tactics,
    quantile,
)
from stepprover.model import read_trajectories


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("store")
    parser.add_argument("--statistic", choices=["TotalNll", "PerTokenNll"],
                        default="PerTokenNll")
    parser.add_argument("--q-lo", type=float, default=0.10)
    parser.add_argument("--q-hi", type=float, default=0.90)
    parser.add_argument("--bins", type=int, default=40)
    args = parser.parse_args()

    trajectories = read_trajectories(args.store)
    statistic = NllStatistic(args.statistic)
    stats = compute_nll_stats(trajectories, statistic)
    t_lo = quantile(stats.values, args.q_lo)
    t_hi = quantile(stats.values, args.q_hi)

    low, high = min(stats.values), max(stats.values)
    span = (high - low) or 1.0
    counts = [0] * args.bins
    for v in stats.values:
        counts[min(int((v - low) / span * args.bins), args.bins - 1)] += 1
    scale = max(counts) or 1
    print(f"{stats.count} steps, mean {stats.mean:.3f}, stddev {stats.stddev:.3f}")
    print(f"keep band: ({t_lo:.3f}, {t_hi:.3f})  [q_lo={args.q_lo}, q_hi={args.q_hi}]\n")
    for i, count in enumerate(counts):
        lo = low + span * i / args.bins
        hi = low + span * (i + 1) / args.bins
        inside = t_lo < (lo + hi) / 2 < t_hi
        bar = ("#" if inside else ".") * max(1, int(50 * count / scale)) if count else ""
        print(f"{lo:7.3f}-{hi:7.3f} {count:>6} {bar}")
    config = FilterConfig(q_lo=args.q_lo, q_hi=args.q_hi, statistic=statistic)
    kept, report = filter_tactics(trajectories, config)
    print(
        f"\nkept {report.kept}, dropped {report.dropped_low} low-NLL "
        f"(already-confident) and {report.dropped_high} high-NLL (noisy)"
    )


if __name__ == "__main__":
    main()
