"""RunConfig loading/validation and the operator commands end to end."""

import json
import subprocess
import sys

import pytest

from stepprover.config import ConfigError, DEFAULT_CONFIG, load_config

CLI = [sys.executable, "-m", "stepprover.cli"]


def run_cli(*args, cwd):
    return subprocess.run(
        CLI + [str(a) for a in args], cwd=cwd, capture_output=True, text=True, timeout=300
    )


# --- config ---------------------------------------------------------------------


def test_defaults_match_published_inference_configuration():
    assert DEFAULT_CONFIG.search.width == 3
    assert DEFAULT_CONFIG.search.temperature == 1.3
    assert DEFAULT_CONFIG.search.alpha == 2.0


def test_load_config_defaults_and_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 9, "search": {"width": 5}}))
    config = load_config(str(path))
    assert config.seed == 9
    assert config.search.width == 5
    assert config.search.temperature == 1.3  # untouched default
    overridden = load_config(str(path), {"search.width": 7, "seed": 1})
    assert overridden.search.width == 7 and overridden.seed == 1


@pytest.mark.parametrize(
    "payload,path_fragment",
    [
        ({"search": {"temperature": 0}}, "search.temperature"),
        ({"search": {"width": 0}}, "search.width"),
        ({"search": {"alpha": -1}}, "search.alpha"),
        ({"filter": {"q_lo": 0.9, "q_hi": 0.1}}, "filter.q_lo"),
        ({"filter": {"statistic": "Nope"}}, "filter.statistic"),
        ({"plateau": {"window": 1}}, "plateau.window"),
        ({"hierarch": {"pool_size": 0}}, "hierarch.pool_size"),
        ({"hierarch": {"per_subgoal_budget": {"max_expansions": 0}}},
         "hierarch.per_subgoal_budget.max_expansions"),
        ({"endpoints": {"env": "bogus"}}, "endpoints.env"),
        ({"config_version": 99}, "config_version"),
        ({"search": {"no_such_field": 1}}, "search.no_such_field"),
    ],
)
def test_validation_names_field_paths(tmp_path, payload, path_fragment):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigError) as exc:
        load_config(str(path))
    assert path_fragment in str(exc.value)


# --- prove ----------------------------------------------------------------------


@pytest.fixture
def theorem_file(tmp_path):
    path = tmp_path / "thm.json"
    path.write_text(json.dumps({"id": "t1", "statement": "add (S 0) 0 = S 0"}))
    return path


def test_prove_success_exit_zero(tmp_path, theorem_file):
    result = run_cli(
        "prove", theorem_file, "--width", 7, "--alpha", 0.0, "--run-dir", "runs", cwd=tmp_path
    )
    assert result.returncode == 0, result.stderr
    run_dir = next((tmp_path / "runs").iterdir())
    record = json.loads((run_dir / "result.json").read_text())
    assert record["outcome"] == "Proved"
    assert [c["tactic"] for c in record["proof"]] == ["add_zero", "refl"]
    proof = (run_dir / "proof.txt").read_text().splitlines()
    assert proof == ["add_zero", "refl"]
    assert (run_dir / "config.json").exists()
    assert (run_dir / "metrics.json").exists()
    inputs = json.loads((run_dir / "inputs.json").read_text())
    assert "config_sha256" in inputs and "theorem_file" in inputs["files"]


def test_prove_failure_exit_one(tmp_path, theorem_file):
    result = run_cli(
        "prove", theorem_file, "--max-expansions", 1, "--width", 7, "--run-dir", "runs",
        cwd=tmp_path,
    )
    assert result.returncode == 1
    run_dir = next((tmp_path / "runs").iterdir())
    record = json.loads((run_dir / "result.json").read_text())
    assert record["outcome"] == "BudgetExceeded"


def test_prove_config_error_exit_two(tmp_path, theorem_file):
    result = run_cli("prove", theorem_file, "--temperature", 0, cwd=tmp_path)
    assert result.returncode == 2
    assert "search.temperature" in result.stderr


def test_prove_byte_identical_result_records(tmp_path, theorem_file):
    """Identical seeded runs produce byte-identical result records."""
    for d in ("a", "b"):
        result = run_cli(
            "prove", theorem_file, "--width", 7, "--alpha", 0.0, "--seed", 5,
            "--run-dir", d, cwd=tmp_path,
        )
        assert result.returncode == 0
    rec_a = next((tmp_path / "a").iterdir()) / "result.json"
    rec_b = next((tmp_path / "b").iterdir()) / "result.json"
    assert rec_a.read_bytes() == rec_b.read_bytes()


def test_prove_with_planner(tmp_path):
    path = tmp_path / "thm.json"
    path.write_text(
        json.dumps(
            {
                "id": "chain",
                "statement": "mul (S (S 0)) (S (S 0)) = add (S (S 0)) (S (S 0))",
            }
        )
    )
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "search": {"width": 9, "temperature": 1.0, "alpha": 0.0},
                "hierarch": {
                    "pool_size": 1,
                    "per_subgoal_budget": {"max_expansions": 200, "max_depth": 6},
                    "max_replans": 2,
                },
            }
        )
    )
    result = run_cli(
        "prove", path, "--planner", "on", "--config", config, "--run-dir", "runs",
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    run_dir = next((tmp_path / "runs").iterdir())
    record = json.loads((run_dir / "result.json").read_text())
    assert record["outcome"] == "Proved"
    assert record["planner"] == "on"
    assert (run_dir / "plan.json").exists()


# --- corpus commands ---------------------------------------------------------------


@pytest.fixture
def corpus_file(tmp_path):
    result = run_cli("make-corpus", "corpus.jsonl", "--seed", 3, "--count", 12, cwd=tmp_path)
    assert result.returncode == 0
    return tmp_path / "corpus.jsonl"


def test_make_corpus_deterministic(tmp_path):
    run_cli("make-corpus", "a.jsonl", "--seed", 3, "--count", 8, cwd=tmp_path)
    run_cli("make-corpus", "b.jsonl", "--seed", 3, "--count", 8, cwd=tmp_path)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_eval_reports_solve_rate(tmp_path, corpus_file):
    result = run_cli(
        "eval", corpus_file, "--width", 7, "--alpha", 0.0, "--max-expansions", 2000,
        "--max-depth", 6, "--run-dir", "runs", cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    run_dir = next((tmp_path / "runs").iterdir())
    report = json.loads((run_dir / "eval.json").read_text())
    assert report["corpus_size"] == 12
    assert 0.0 <= report["solve_rate"] <= 1.0
    assert report["solved"] == len(report["proved_ids"])


def test_eval_empty_corpus_exit_one(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    result = run_cli("eval", empty, cwd=tmp_path)
    assert result.returncode == 1


def test_iterate_rounds_and_resume(tmp_path, corpus_file):
    args = ["iterate", corpus_file, "--width", 7, "--alpha", 0.0,
            "--max-expansions", 300, "--max-depth", 6, "--workers", 2]
    result = run_cli(*args, "--rounds", 2, "--run-dir", "runs", cwd=tmp_path)
    assert result.returncode == 0, result.stderr
    run_dir = next((tmp_path / "runs").iterdir())
    reports = sorted(run_dir.glob("round_*.json"))
    assert len(reports) == 2
    assert (run_dir / "state.json").exists()
    first_round_bytes = (run_dir / "round_000.json").read_bytes()
    # resume adds one more round on top of the persisted state
    result = run_cli(*args, "--rounds", 3, "--resume", run_dir, cwd=tmp_path)
    assert result.returncode == 0, result.stderr
    assert "round 2:" in result.stdout
    assert "round 0:" not in result.stdout  # earlier rounds are NOT replayed
    reports = sorted(run_dir.glob("round_*.json"))
    assert len(reports) == 3
    last = json.loads(reports[-1].read_text())
    assert last["round_index"] == 2
    # completed rounds were left untouched on disk
    assert (run_dir / "round_000.json").read_bytes() == first_round_bytes
    state = json.loads((run_dir / "state.json").read_text())
    assert state["next_round"] == 3


def test_iterate_zero_rounds_usage_error(tmp_path, corpus_file):
    result = run_cli("iterate", corpus_file, "--rounds", 0, cwd=tmp_path)
    assert result.returncode == 2


def test_curate_normal_and_aggressive_subset(tmp_path, corpus_file):
    # build a trajectory store first
    result = run_cli(
        "iterate", corpus_file, "--rounds", 1, "--width", 7, "--alpha", 0.0,
        "--max-expansions", 300, "--max-depth", 6, "--run-dir", "runs", cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    store = next((tmp_path / "runs").iterdir()) / "round_000.jsonl"
    assert store.exists()

    result = run_cli("curate", store, "--out-dir", "cur_n", cwd=tmp_path)
    assert result.returncode == 0, result.stderr
    normal = json.loads((tmp_path / "cur_n" / "curation.json").read_text())
    assert normal["kept"] + normal["dropped_low"] + normal["dropped_high"] > 0
    assert (tmp_path / "cur_n" / "sft.jsonl").exists()
    assert (tmp_path / "cur_n" / "histogram.csv").exists()
    assert (tmp_path / "cur_n" / "sft.jsonl.manifest.json").exists()

    result = run_cli("curate", store, "--aggressive", "--out-dir", "cur_a", cwd=tmp_path)
    assert result.returncode == 0, result.stderr
    aggressive = json.loads((tmp_path / "cur_a" / "curation.json").read_text())
    # aggressive keeps a subset of the normal run's kept set
    normal_set = {
        (r["prompt"], r["completion"])
        for r in map(json.loads, (tmp_path / "cur_n" / "sft.jsonl").read_text().splitlines())
    }
    aggressive_set = {
        (r["prompt"], r["completion"])
        for r in map(json.loads, (tmp_path / "cur_a" / "sft.jsonl").read_text().splitlines())
    }
    assert aggressive_set <= normal_set


def test_curate_empty_store_exit_one(tmp_path):
    store = tmp_path / "empty.jsonl"
    store.write_text("")
    result = run_cli("curate", store, cwd=tmp_path)
    assert result.returncode == 1
