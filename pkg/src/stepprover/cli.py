"""Operator commands.

    stepprover prove THEOREM_FILE [--planner on|off] [--config FILE] ...
    stepprover iterate CORPUS_FILE --rounds N [--resume] ...
    stepprover curate TRAJECTORIES_FILE [--aggressive] ...
    stepprover eval CORPUS_FILE ...
    stepprover serve-env [--tcp HOST:PORT]
    stepprover make-corpus OUT_FILE --seed S --count N

Exit codes: 0 success, 1 domain failure (no proof, empty input), 2 usage or
configuration error. Every command is deterministic under a fixed config and
seed with the toy environment and in-tree policies (multi-agent sprints race
on wall clock, so their expansion totals are scheduling-dependent; result
outcomes and proofs are not).

Run directories are self-describing: a config snapshot, content hashes of
every input, the result record, and a metrics summary. Result records never
contain wall-clock data; timing lives in metrics.json.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time

import click

from .config import ConfigError, RunConfig, load_config
from .curation import (
    EmptyInput,
    IterationState,
    compute_nll_stats,
    dump_histogram_csv,
    export_sft,
    filter_tactics,
    run_expert_iteration,
    solve_corpus,
    state_from_record,
    state_to_record,
)
from .hierarch.guided import GuidedResult, run_planner_guided
from .hierarch.planner import RemotePlanner, ToyChainPlanner
from .model import Theorem, read_trajectories
from .policy import RemotePolicy, TabularPolicy
from .search import SearchOutcome, run_search
from .toyenv.env import init_session
from .toyenv.oracle import generate_corpus
from .toyenv.terms import ToyParseError
from .wire import open_wire_session, serve_stdio, serve_tcp

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _fail_usage(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_USAGE)


def _load_config(path: str | None, overrides: dict) -> RunConfig:
    try:
        return load_config(path, overrides)
    except ConfigError as exc:
        _fail_usage(str(exc))
    except OSError as exc:
        _fail_usage(f"cannot read config: {exc}")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _make_run_dir(base: str | None, command: str) -> str:
    root = base or "runs"
    stamp = time.strftime("%Y%m%d-%H%M%S")
    path = os.path.join(root, f"{command}-{stamp}")
    suffix = 0
    while os.path.exists(path):
        suffix += 1
        path = os.path.join(root, f"{command}-{stamp}-{suffix}")
    os.makedirs(path)
    return path


def _snapshot(run_dir: str, config: RunConfig, inputs: dict[str, str]) -> str:
    config_text = config.to_json()
    with open(os.path.join(run_dir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(config_text)
    config_hash = hashlib.sha256(config_text.encode()).hexdigest()
    from . import __version__

    with open(os.path.join(run_dir, "inputs.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "stepprover_version": __version__,
                "config_sha256": config_hash,
                "files": {k: _sha256(v) for k, v in inputs.items()},
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return config_hash


def _write_json(path: str, record: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_theorem(path: str) -> Theorem:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict) and "statement" in data:
        return Theorem(
            id=data.get("id") or os.path.splitext(os.path.basename(path))[0],
            statement=data["statement"],
        )
    statement = text.strip()
    if not statement:
        _fail_usage(f"{path}: empty theorem file")
    return Theorem(id=os.path.splitext(os.path.basename(path))[0], statement=statement)


def _read_corpus(path: str) -> list[Theorem]:
    theorems = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            theorems.append(Theorem(id=record["id"], statement=record["statement"]))
    return theorems


def _env_factory(config: RunConfig):
    env = config.endpoints.env
    if env == "toy":
        return init_session
    _, host, port = env.split(":")
    return lambda statement, theorem_id: open_wire_session(
        host, int(port), statement, theorem_id
    )


def _policy(config: RunConfig):
    if config.endpoints.policy_url:
        return RemotePolicy(endpoint=config.endpoints.policy_url)
    return TabularPolicy(
        smoothing_alpha=config.smoothing_alpha, hypothesis_rewrites=True
    )


def _planner(config: RunConfig):
    if config.endpoints.planner_url:
        return RemotePlanner(endpoint=config.endpoints.planner_url)
    return ToyChainPlanner()


_CONFIG_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(), help="config file (JSON)"),
    click.option("--seed", type=int, help="override seed"),
    click.option("--width", type=int, help="override search.width"),
    click.option("--temperature", type=float, help="override search.temperature"),
    click.option("--alpha", type=float, help="override search.alpha"),
    click.option("--max-expansions", type=int, help="override search.max_expansions"),
    click.option("--max-depth", type=int, help="override search.max_depth"),
    click.option("--workers", type=int, help="override workers"),
]


def _with_config_options(command):
    for option in reversed(_CONFIG_OPTIONS):
        command = option(command)
    return command


def _overrides(seed, width, temperature, alpha, max_expansions, max_depth, workers) -> dict:
    return {
        "seed": seed,
        "workers": workers,
        "search.width": width,
        "search.temperature": temperature,
        "search.alpha": alpha,
        "search.max_expansions": max_expansions,
        "search.max_depth": max_depth,
    }


@click.group()
def main() -> None:
    """Step-level proof search engine."""


@main.command("prove")
@click.argument("theorem_file", type=click.Path(exists=True))
@click.option("--planner", type=click.Choice(["on", "off"]), default="off")
@click.option("--run-dir", "run_base", type=click.Path(), help="runs root directory")
@_with_config_options
def cmd_prove(
    theorem_file, planner, run_base, config_path, seed, width, temperature, alpha,
    max_expansions, max_depth, workers,
):
    """Prove one theorem, monolithically or planner-guided."""
    config = _load_config(
        config_path, _overrides(seed, width, temperature, alpha, max_expansions, max_depth, workers)
    )
    theorem = _read_theorem(theorem_file)
    run_dir = _make_run_dir(run_base, "prove")
    config_hash = _snapshot(run_dir, config, {"theorem_file": theorem_file})
    settings = config.search_settings()
    factory = _env_factory(config)
    policy = _policy(config)

    started = time.monotonic()
    try:
        if planner == "on":
            result = run_planner_guided(
                theorem,
                _planner(config),
                policy,
                factory,
                config.guided_config(),
                width=settings.width,
                temperature=settings.temperature,
                alpha=settings.alpha,
                seed=config.seed,
            )
        else:
            session, root = factory(theorem.statement, theorem.id)
            try:
                result = run_search(
                    session,
                    policy,
                    root,
                    settings.budget,
                    width=settings.width,
                    temperature=settings.temperature,
                    alpha=settings.alpha,
                    seed=config.seed,
                )
            finally:
                session.close()
    except ToyParseError as exc:
        _fail_usage(f"{theorem_file}: {exc}")
    wall_ms = int((time.monotonic() - started) * 1000)

    record = {
        "theorem_id": theorem.id,
        "statement": theorem.statement,
        "planner": planner,
        "seed": config.seed,
        "config_sha256": config_hash,
        **result.to_record(),
    }
    if isinstance(result, GuidedResult):
        record["replans_used"] = result.replans_used
        record["flat_proof_replayed"] = result.flat_proof_replayed
        if result.plan is not None:
            from .hierarch.plan import plan_to_record

            _write_json(os.path.join(run_dir, "plan.json"), plan_to_record(result.plan))
    _write_json(os.path.join(run_dir, "result.json"), record)
    metrics = {
        "wall_ms": wall_ms,
        "expansions": result.expansions_used,
        "proved": result.outcome is SearchOutcome.PROVED,
        "replans": getattr(result, "replans_used", 0),
        "cache_transitions": getattr(result, "cache_transitions", 0),
        "subgoals_proven": len(result.plan.proven_entries)
        if isinstance(result, GuidedResult) and result.plan is not None
        else 0,
    }
    _write_json(os.path.join(run_dir, "metrics.json"), metrics)
    if result.outcome is SearchOutcome.PROVED:
        with open(os.path.join(run_dir, "proof.txt"), "w", encoding="utf-8") as fh:
            for cand in result.proof:
                fh.write(cand.tactic + "\n")
        click.echo(f"proved {theorem.id} in {result.expansions_used} expansions ({run_dir})")
        sys.exit(EXIT_OK)
    click.echo(f"{result.outcome.value}: {theorem.id} ({run_dir})")
    sys.exit(EXIT_FAILURE)


@main.command("iterate")
@click.argument("corpus_file", type=click.Path(exists=True))
@click.option("--rounds", type=int, required=True)
@click.option("--run-dir", "run_base", type=click.Path())
@click.option("--resume", "resume_dir", type=click.Path(), help="continue an interrupted run")
@_with_config_options
def cmd_iterate(
    corpus_file, rounds, run_base, resume_dir, config_path, seed, width, temperature,
    alpha, max_expansions, max_depth, workers,
):
    """Run expert-iteration rounds over a corpus."""
    if rounds < 1:
        _fail_usage("--rounds must be >= 1")
    config = _load_config(
        config_path, _overrides(seed, width, temperature, alpha, max_expansions, max_depth, workers)
    )
    corpus = _read_corpus(corpus_file)
    if not corpus:
        click.echo("error: empty corpus", err=True)
        sys.exit(EXIT_FAILURE)

    state = None
    if resume_dir:
        run_dir = resume_dir
        state_path = os.path.join(run_dir, "state.json")
        if not os.path.exists(state_path):
            _fail_usage(f"{resume_dir}: no state.json to resume from")
        with open(state_path, encoding="utf-8") as fh:
            state = state_from_record(json.load(fh))
        remaining = rounds - state.next_round
        if remaining < 1:
            click.echo(f"run already has {state.next_round} rounds; nothing to do")
            sys.exit(EXIT_OK)
    else:
        run_dir = _make_run_dir(run_base, "iterate")
        _snapshot(run_dir, config, {"corpus_file": corpus_file})
        remaining = rounds

    def persist(report, current_state: IterationState) -> None:
        _write_json(os.path.join(run_dir, "state.json"), state_to_record(current_state))

    reports = run_expert_iteration(
        corpus,
        _policy(config),
        remaining,
        config.iteration_config(),
        run_dir,
        seed=config.seed,
        state=state,
        on_round=persist,
    )
    for report in reports:
        click.echo(
            f"round {report.round_index}: solve_rate={report.solve_rate:.3f} "
            f"eval={report.eval_solve_rate:.3f} kept={report.kept_steps}"
            + (" [soft reset]" if report.soft_reset else "")
        )
    sys.exit(EXIT_OK)


@main.command("curate")
@click.argument("trajectories_file", type=click.Path(exists=True))
@click.option("--aggressive", is_flag=True)
@click.option("--mode", type=click.Choice(["continuous", "retrain"]), default="continuous")
@click.option("--out-dir", type=click.Path(), default=None)
@_with_config_options
def cmd_curate(
    trajectories_file, aggressive, mode, out_dir, config_path, seed, width, temperature,
    alpha, max_expansions, max_depth, workers,
):
    """Filter a trajectory store and export the kept steps for SFT."""
    config = _load_config(
        config_path, _overrides(seed, width, temperature, alpha, max_expansions, max_depth, workers)
    )
    trajectories = read_trajectories(trajectories_file)
    out_dir = out_dir or _make_run_dir(None, "curate")
    os.makedirs(out_dir, exist_ok=True)
    try:
        kept, report = filter_tactics(trajectories, config.filter_config(), aggressive=aggressive)
        stats = compute_nll_stats(trajectories, config.filter_config().statistic)
    except EmptyInput as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)
    dump_histogram_csv(stats, os.path.join(out_dir, "histogram.csv"))
    manifest = export_sft(kept, os.path.join(out_dir, "sft.jsonl"), mode=mode)
    _write_json(
        os.path.join(out_dir, "curation.json"),
        {
            "aggressive": aggressive,
            "statistic": config.filter.statistic,
            "q_lo": config.filter.aggressive_q_lo if aggressive else config.filter.q_lo,
            "q_hi": config.filter.aggressive_q_hi if aggressive else config.filter.q_hi,
            "kept": report.kept,
            "dropped_low": report.dropped_low,
            "dropped_high": report.dropped_high,
            "t_lo": report.t_lo,
            "t_hi": report.t_hi,
            "degenerate": report.degenerate,
            "sft_records": manifest["records"],
        },
    )
    click.echo(
        f"kept {report.kept} / {report.total} steps "
        f"(dropped {report.dropped_low} low, {report.dropped_high} high) -> {out_dir}"
    )
    sys.exit(EXIT_OK)


@main.command("eval")
@click.argument("corpus_file", type=click.Path(exists=True))
@click.option("--run-dir", "run_base", type=click.Path())
@_with_config_options
def cmd_eval(
    corpus_file, run_base, config_path, seed, width, temperature, alpha,
    max_expansions, max_depth, workers,
):
    """Measure the solve rate of the configured policy over a corpus."""
    config = _load_config(
        config_path, _overrides(seed, width, temperature, alpha, max_expansions, max_depth, workers)
    )
    corpus = _read_corpus(corpus_file)
    if not corpus:
        click.echo("error: empty corpus", err=True)
        sys.exit(EXIT_FAILURE)
    run_dir = _make_run_dir(run_base, "eval")
    _snapshot(run_dir, config, {"corpus_file": corpus_file})
    found = solve_corpus(
        corpus,
        _policy(config),
        config.search_settings(),
        seed=config.seed,
        workers=config.workers,
        env_factory=_env_factory(config),
    )
    rate = len(found) / len(corpus)
    _write_json(
        os.path.join(run_dir, "eval.json"),
        {
            "corpus_size": len(corpus),
            "solved": len(found),
            "solve_rate": rate,
            "seed": config.seed,
            "proved_ids": sorted(found),
        },
    )
    click.echo(f"solve_rate {rate:.4f} ({len(found)}/{len(corpus)}) -> {run_dir}")
    sys.exit(EXIT_OK)


@main.command("serve-env")
@click.option("--tcp", "tcp_address", default=None, help="HOST:PORT (default: stdio)")
@click.option("--max-connections", type=int, default=None)
def cmd_serve_env(tcp_address, max_connections):
    """Serve the toy environment over the wire protocol."""
    if tcp_address:
        host, port = tcp_address.rsplit(":", 1)
        serve_tcp(host, int(port), max_connections=max_connections)
    else:
        serve_stdio()


@main.command("make-corpus")
@click.argument("out_file", type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--count", type=int, default=200)
@click.option("--max-value", type=int, default=8)
def cmd_make_corpus(out_file, seed, count, max_value):
    """Generate a toy corpus as JSONL."""
    if count < 1:
        _fail_usage("--count must be >= 1")
    theorems = generate_corpus(seed, count, max_value)
    with open(out_file, "w", encoding="utf-8") as fh:
        for theorem in theorems:
            fh.write(json.dumps({"id": theorem.id, "statement": theorem.statement}))
            fh.write("\n")
    click.echo(f"wrote {len(theorems)} theorems to {out_file}")


if __name__ == "__main__":
    main()
