"""Training-side data machinery: perplexity statistics, adaptive tactic
filtering, plateau detection, soft resets, SFT export, and the
expert-iteration round driver.

Filtering is adaptive: the keep band is recomputed from each invocation's
own NLL distribution, so it tracks the policy as it sharpens. Tactics at or
outside the quantile thresholds are dropped -- the low tail carries steps
the policy already finds trivial, the high tail mostly noise. The aggressive
variant (used during soft resets) keeps a strictly narrower central band.

A soft reset re-solves the corpus with the current policy, keeps the best
proof per theorem, filters aggressively, and fits a fresh policy from
scratch on only that curated data -- trading a temporary dip for renewed
exploration headroom.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

from .model import (
    TacticCandidate,
    Theorem,
    Trajectory,
    TrajectoryStep,
    write_trajectories,
)
from .policy import TabularPolicy
from .search import SearchOutcome, SearchSettings, run_search
from .toyenv.env import init_session

__all__ = [
    "EmptyInput",
    "EmptyDataset",
    "DegenerateDistribution",
    "NllStatistic",
    "NllStats",
    "FilterConfig",
    "FilterReport",
    "RoundReport",
    "IterationConfig",
    "compute_nll_stats",
    "quantile",
    "filter_tactics",
    "detect_plateau",
    "resynthesize",
    "better_trajectory",
    "export_sft",
    "run_expert_iteration",
    "dump_histogram_csv",
    "solve_corpus",
    "IterationState",
    "state_to_record",
    "state_from_record",
    "split_corpus",
]

HIST_BIN_WIDTH = 0.25
HIST_RANGE = 20.0
HIST_BINS = int(HIST_RANGE / HIST_BIN_WIDTH)  # plus one overflow bin

# Fine-tuning recipes exported alongside every SFT dataset. Continuous
# refinement is a single conservative epoch; retrain (after a soft reset)
# rebuilds from the base checkpoint at a higher rate for three epochs.
SFT_RECIPES = {
    "continuous": {
        "lr_start": 5e-6,
        "lr_end": 1e-7,
        "lr_schedule": "cosine",
        "epochs": 1,
        "batch_size": 1024,
    },
    "retrain": {
        "lr_start": 2e-5,
        "lr_end": 1e-6,
        "lr_schedule": "cosine",
        "epochs": 3,
        "batch_size": 1024,
    },
}


class EmptyInput(ValueError):
    """A statistics or filtering call received no values."""


class EmptyDataset(ValueError):
    """An export produced no records."""


class DegenerateDistribution(UserWarning):
    """All NLL values identical; filtering kept everything instead of nothing."""


class NllStatistic(Enum):
    TOTAL_NLL = "TotalNll"
    PER_TOKEN_NLL = "PerTokenNll"

    def of(self, candidate: TacticCandidate) -> float:
        if self is NllStatistic.TOTAL_NLL:
            return candidate.nll_total
        return candidate.nll_per_token


@dataclass(frozen=True)
class NllStats:
    values: tuple[float, ...]
    count: int
    mean: float
    stddev: float
    histogram: tuple[int, ...]  # HIST_BINS fixed-width bins plus overflow


def _steps(trajectories: Sequence[Trajectory]) -> list[TrajectoryStep]:
    return [step for traj in trajectories for step in traj.steps]


def compute_nll_stats(
    trajectories: Sequence[Trajectory],
    statistic: NllStatistic = NllStatistic.PER_TOKEN_NLL,
) -> NllStats:
    """Per-step NLL values with two-pass mean/stddev and a fixed-bin histogram."""
    steps = _steps(trajectories)
    if not steps:
        raise EmptyInput("no steps to compute statistics over")
    values = tuple(statistic.of(s.candidate) for s in steps)
    mean = sum(values) / len(values)
    stddev = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    bins = [0] * (HIST_BINS + 1)
    for v in values:
        index = HIST_BINS if v >= HIST_RANGE else int(v / HIST_BIN_WIDTH)
        bins[index] += 1
    return NllStats(
        values=values, count=len(values), mean=mean, stddev=stddev, histogram=tuple(bins)
    )


def dump_histogram_csv(stats: NllStats, path) -> None:
    """bin_low, bin_high, count rows; the final row is the overflow bin."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_low,bin_high,count\n")
        for i in range(HIST_BINS):
            fh.write(f"{i * HIST_BIN_WIDTH},{(i + 1) * HIST_BIN_WIDTH},{stats.histogram[i]}\n")
        fh.write(f"{HIST_RANGE},inf,{stats.histogram[HIST_BINS]}\n")


def quantile(values: Sequence[float], q: float) -> float:
    """Nearest-rank quantile: sorted ascending, element at rank
    max(1, ceil(q * n)), 1-indexed."""
    if not values:
        raise EmptyInput("quantile of no values")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class FilterConfig:
    q_lo: float = 0.10
    q_hi: float = 0.90
    statistic: NllStatistic = NllStatistic.PER_TOKEN_NLL
    aggressive_q_lo: float = 0.25
    aggressive_q_hi: float = 0.75

    def __post_init__(self) -> None:
        if not 0.0 <= self.q_lo < self.q_hi <= 1.0:
            raise ValueError(f"need 0 <= q_lo < q_hi <= 1, got ({self.q_lo}, {self.q_hi})")
        if not self.q_lo < self.aggressive_q_lo < self.aggressive_q_hi < self.q_hi:
            raise ValueError(
                "aggressive bounds must lie strictly inside the normal bounds"
            )


@dataclass(frozen=True)
class FilterReport:
    kept: int
    dropped_low: int
    dropped_high: int
    t_lo: float
    t_hi: float
    degenerate: bool = False

    @property
    def total(self) -> int:
        return self.kept + self.dropped_low + self.dropped_high


def filter_tactics(
    trajectories: Sequence[Trajectory],
    config: FilterConfig,
    aggressive: bool = False,
) -> tuple[list[tuple[str, TacticCandidate]], FilterReport]:
    """Keep the central band of the NLL distribution, strictly between the
    two quantile thresholds computed from THIS input (adaptive per round).

    When every value is identical the band is empty by construction; that
    would discard a whole round, so everything is kept instead and a
    DegenerateDistribution warning is issued.
    """
    steps = _steps(trajectories)
    if not steps:
        raise EmptyInput("no steps to filter")
    values = [config.statistic.of(s.candidate) for s in steps]
    q_lo = config.aggressive_q_lo if aggressive else config.q_lo
    q_hi = config.aggressive_q_hi if aggressive else config.q_hi
    t_lo = quantile(values, q_lo)
    t_hi = quantile(values, q_hi)
    if t_lo == t_hi:
        warnings.warn(
            f"all {len(values)} NLL values give t_lo == t_hi == {t_lo}; keeping everything",
            DegenerateDistribution,
        )
        kept = [(s.state, s.candidate) for s in steps]
        return kept, FilterReport(len(kept), 0, 0, t_lo, t_hi, degenerate=True)
    kept = []
    dropped_low = dropped_high = 0
    for step, value in zip(steps, values):
        if value <= t_lo:
            dropped_low += 1
        elif value >= t_hi:
            dropped_high += 1
        else:
            kept.append((step.state, step.candidate))
    return kept, FilterReport(len(kept), dropped_low, dropped_high, t_lo, t_hi)


def detect_plateau(eval_history: Sequence[float], window: int, epsilon: float) -> bool:
    """True iff the window-step improvement has fallen below epsilon."""
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(eval_history) < window:
        return False
    return (eval_history[-1] - eval_history[-window]) < epsilon


# --- proof selection / re-synthesis ------------------------------------------


def better_trajectory(new: Trajectory | None, old: Trajectory | None) -> Trajectory | None:
    """Shortest proof wins; ties go to the larger cumulative logprob, then to
    the earlier find (the old one)."""
    if new is None:
        return old
    if old is None:
        return new
    if len(new.steps) != len(old.steps):
        return new if len(new.steps) < len(old.steps) else old
    if new.path_logprob_sum > old.path_logprob_sum:
        return new
    return old


def _toy_env_factory(statement: str, theorem_id: str):
    return init_session(statement, theorem_id)


def solve_corpus(
    theorems: Sequence[Theorem],
    policy,
    settings: SearchSettings,
    seed: int,
    workers: int = 4,
    env_factory=None,
) -> dict[str, Trajectory]:
    """Search every theorem (bounded worker pool); returns trajectories for
    the proved ones. Deterministic: per-theorem seeds derive from the base
    seed and corpus position, and results never depend on scheduling."""
    env_factory = env_factory or _toy_env_factory

    def attempt(position: int) -> Trajectory | None:
        theorem = theorems[position]
        session, root = env_factory(theorem.statement, theorem.id)
        try:
            result = run_search(
                session,
                policy,
                root,
                settings.budget,
                width=settings.width,
                temperature=settings.temperature,
                alpha=settings.alpha,
                seed=seed + position,
            )
        finally:
            session.close()
        return result.trajectory if result.outcome is SearchOutcome.PROVED else None

    if workers <= 1:
        found = map(attempt, range(len(theorems)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            found = pool.map(attempt, range(len(theorems)))
    return {
        theorems[i].id: traj for i, traj in enumerate(found) if traj is not None
    }


def resynthesize(
    corpus: Sequence[Theorem],
    policy,
    settings: SearchSettings,
    prior_best: Mapping[str, Trajectory] | None = None,
    seed: int = 0,
    workers: int = 4,
    env_factory=None,
) -> list[Trajectory]:
    """Re-solve the whole corpus with the current policy and keep, per
    theorem, the best known proof. Theorems that fail now but have a prior
    proof keep it: de-noising must not shrink coverage. Per-theorem failures
    are tolerated."""
    prior_best = prior_best or {}
    fresh = solve_corpus(corpus, policy, settings, seed=seed, workers=workers, env_factory=env_factory)
    out: list[Trajectory] = []
    for theorem in corpus:
        best = better_trajectory(fresh.get(theorem.id), prior_best.get(theorem.id))
        if best is not None:
            out.append(best)
    return out


# --- SFT export ---------------------------------------------------------------


def export_sft(
    kept_steps: Sequence[tuple[str, TacticCandidate]],
    output_path,
    mode: str = "continuous",
) -> dict:
    """Write deduplicated {"prompt", "completion"} records plus a manifest
    carrying the fine-tuning recipe for the chosen mode. Returns the manifest
    (also written next to the dataset as <output_path>.manifest.json)."""
    if mode not in SFT_RECIPES:
        raise ValueError(f"mode must be one of {sorted(SFT_RECIPES)}, got {mode!r}")
    if not kept_steps:
        raise EmptyDataset("no steps to export")
    seen: set[tuple[str, str]] = set()
    records = 0
    try:
        with open(output_path, "w", encoding="utf-8") as fh:
            for state_text, candidate in kept_steps:
                pair = (state_text, candidate.tactic)
                if pair in seen:
                    continue
                seen.add(pair)
                fh.write(
                    json.dumps(
                        {"prompt": state_text, "completion": candidate.tactic},
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
                records += 1
        manifest = {
            "mode": mode,
            **SFT_RECIPES[mode],
            "records": records,
            "dataset": os.path.basename(str(output_path)),
        }
        manifest_path = f"{output_path}.manifest.json"
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IOError(f"failed to write SFT export: {exc}") from exc
    return manifest


# --- expert iteration ----------------------------------------------------------


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    corpus_size: int
    solved: int
    solve_rate: float
    trajectories_path: str
    kept_steps: int
    dropped_low: int
    dropped_high: int
    eval_solve_rate: float
    soft_reset: bool = False

    def to_record(self) -> dict:
        return {
            "round_index": self.round_index,
            "corpus_size": self.corpus_size,
            "solved": self.solved,
            "solve_rate": self.solve_rate,
            "trajectories_path": self.trajectories_path,
            "kept_steps": self.kept_steps,
            "dropped_low": self.dropped_low,
            "dropped_high": self.dropped_high,
            "eval_solve_rate": self.eval_solve_rate,
            "soft_reset": self.soft_reset,
        }


@dataclass(frozen=True)
class IterationConfig:
    search: SearchSettings
    filter: FilterConfig = FilterConfig()
    plateau_window: int = 3
    plateau_epsilon: float = 0.005
    eval_fraction: float = 0.25
    smoothing_alpha: float = 1.0
    workers: int = 4
    # test hook: replaces detect_plateau; receives the eval history
    plateau_detector: Callable[[Sequence[float]], bool] | None = None


def split_corpus(
    corpus: Sequence[Theorem], eval_fraction: float, seed: int
) -> tuple[list[Theorem], list[Theorem]]:
    """Deterministic shuffled split into (train, eval)."""
    import random

    order = list(corpus)
    random.Random(seed).shuffle(order)
    n_eval = max(1, int(len(order) * eval_fraction)) if len(order) > 1 else 0
    return order[n_eval:], order[:n_eval]


@dataclass
class IterationState:
    """Everything a round needs from the past; serializable for resume."""

    policy: TabularPolicy
    best: dict[str, Trajectory]
    eval_history: list[float]
    next_round: int = 0
    resets: int = 0


def state_to_record(state: IterationState) -> dict:
    from .model import trajectory_to_record

    return {
        "policy": {
            "counts": [[f, t, c] for (f, t), c in sorted(state.policy.counts.items())],
            "smoothing_alpha": state.policy.smoothing_alpha,
            "alphabet": list(state.policy.alphabet),
            "hypothesis_rewrites": state.policy.hypothesis_rewrites,
            "rw_share": state.policy.rw_share,
        },
        "best": [trajectory_to_record(t) for _, t in sorted(state.best.items())],
        "eval_history": state.eval_history,
        "next_round": state.next_round,
        "resets": state.resets,
    }


def state_from_record(record: dict) -> IterationState:
    from .model import trajectory_from_record

    p = record["policy"]
    policy = TabularPolicy(
        counts={(f, t): c for f, t, c in p["counts"]},
        smoothing_alpha=p["smoothing_alpha"],
        alphabet=tuple(p["alphabet"]),
        hypothesis_rewrites=p["hypothesis_rewrites"],
        rw_share=p["rw_share"],
    )
    best = {
        rec["theorem_id"]: trajectory_from_record(rec) for rec in record["best"]
    }
    return IterationState(
        policy=policy,
        best=best,
        eval_history=list(record["eval_history"]),
        next_round=record["next_round"],
        resets=record["resets"],
    )


def run_expert_iteration(
    corpus: Sequence[Theorem],
    initial_policy: TabularPolicy,
    rounds: int,
    config: IterationConfig,
    out_dir,
    seed: int = 0,
    state: IterationState | None = None,
    on_round: Callable[[RoundReport, IterationState], None] | None = None,
) -> list[RoundReport]:
    """Alternate proof generation and policy refinement for `rounds` rounds.

    Per round: search the train split, filter the new trajectories' tactics
    through the normal band, refine the tabular policy on the kept steps,
    measure the eval solve rate, then check for a plateau. On plateau the
    soft reset runs: re-synthesize best proofs over the train split, filter
    aggressively, and fit a completely fresh table from only that curated
    data. Deterministic under a fixed seed.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    train, evaluation = split_corpus(corpus, config.eval_fraction, seed)
    detector = config.plateau_detector or (
        lambda history: detect_plateau(history, config.plateau_window, config.plateau_epsilon)
    )
    if state is None:
        state = IterationState(policy=initial_policy, best={}, eval_history=[])

    reports: list[RoundReport] = []
    first_round = state.next_round
    for offset in range(rounds):
        round_index = first_round + offset
        round_seed = seed + 10_000 * (round_index + 1)

        found = solve_corpus(
            train, state.policy, config.search, seed=round_seed, workers=config.workers
        )
        for theorem_id, traj in found.items():
            state.best[theorem_id] = better_trajectory(traj, state.best.get(theorem_id))

        trajectories = [found[t.id] for t in train if t.id in found]
        traj_path = os.path.join(out_dir, f"round_{round_index:03d}.jsonl")
        write_trajectories(traj_path, trajectories)

        if trajectories:
            kept, freport = filter_tactics(trajectories, config.filter, aggressive=False)
        else:
            kept, freport = [], FilterReport(0, 0, 0, 0.0, 0.0)
        if kept:
            state.policy = state.policy.updated(
                [(s, c.tactic) for s, c in kept]
            )

        eval_found = solve_corpus(
            evaluation, state.policy, config.search, seed=round_seed + 1, workers=config.workers
        )
        eval_rate = len(eval_found) / len(evaluation) if evaluation else 0.0
        state.eval_history.append(eval_rate)

        soft_reset = detector(list(state.eval_history))
        if soft_reset:
            resynthesized = resynthesize(
                train,
                state.policy,
                config.search,
                prior_best=state.best,
                seed=round_seed + 2,
                workers=config.workers,
            )
            state.best = {t.theorem_id: t for t in resynthesized}
            aggressive_kept, _ = filter_tactics(
                resynthesized, config.filter, aggressive=True
            )
            fresh = TabularPolicy(
                counts={},
                smoothing_alpha=config.smoothing_alpha,
                alphabet=state.policy.alphabet,
                hypothesis_rewrites=state.policy.hypothesis_rewrites,
                rw_share=state.policy.rw_share,
            )
            state.policy = fresh.updated([(s, c.tactic) for s, c in aggressive_kept])
            state.resets += 1

        report = RoundReport(
            round_index=round_index,
            corpus_size=len(train),
            solved=len(found),
            solve_rate=len(found) / len(train) if train else 0.0,
            trajectories_path=traj_path,
            kept_steps=freport.kept,
            dropped_low=freport.dropped_low,
            dropped_high=freport.dropped_high,
            eval_solve_rate=eval_rate,
            soft_reset=soft_reset,
        )
        reports.append(report)
        with open(os.path.join(out_dir, f"round_{round_index:03d}.json"), "w") as fh:
            json.dump(report.to_record(), fh, indent=2)
            fh.write("\n")
        # advance BEFORE persisting so an interrupted run resumes after,
        # not inside, its last completed round
        state.next_round = round_index + 1
        if on_round is not None:
            on_round(report, state)
    return reports
