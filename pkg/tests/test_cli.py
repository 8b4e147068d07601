"""Command-line surface: reports, exit codes, config validation."""

import json
import math

import numpy as np
import pytest

from divset import Embedding, EmbeddingSet, save_embeddings
from divset.cli import main

LN2 = math.log(2)
LN3 = math.log(3)


@pytest.fixture
def oracle_file(tmp_path):
    """Query plus three orthogonal items and a duplicate of the first."""
    e = np.eye(3)
    q = (e[0] + e[1] + e[2]) / math.sqrt(3)
    items = [
        Embedding("query", q),
        Embedding("a", e[0]),
        Embedding("b", e[1]),
        Embedding("c", e[2]),
        Embedding("d", e[0]),
    ]
    path = tmp_path / "emb.jsonl"
    save_embeddings(EmbeddingSet(items), path)
    return path


class TestScore:
    def test_query_as_candidate_with_empty_refs(self, oracle_file, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(
            [
                "score",
                "--embeddings",
                str(oracle_file),
                "--query-id",
                "query",
                "--lambda-div",
                "0",
                "--lambda-rel",
                "1",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        by_id = {row["id"]: row for row in report["candidates"]}
        assert by_id["query"]["composite"] == pytest.approx(1.0, abs=1e-12)
        assert "query" in capsys.readouterr().out

    def test_duplicate_of_ref_scores_diminished_gain(self, oracle_file, tmp_path):
        out = tmp_path / "report.json"
        code = main(
            [
                "score",
                "--embeddings",
                str(oracle_file),
                "--query-id",
                "query",
                "--ref-id",
                "a",
                "--lambda-div",
                "1",
                "--lambda-rel",
                "0",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        by_id = {row["id"]: row for row in json.loads(out.read_text())["candidates"]}
        assert by_id["d"]["composite"] == pytest.approx(LN3 - LN2, abs=1e-9)
        assert "a" not in by_id  # reference members are not scored

    def test_unknown_id_exits_2(self, oracle_file, capsys):
        code = main(["score", "--embeddings", str(oracle_file), "--query-id", "missing"])
        assert code == 2
        assert "missing" in capsys.readouterr().err


class TestSelect:
    def test_greedy_matches_bruteforce_on_oracle_pool(self, oracle_file, tmp_path):
        greedy_out = tmp_path / "greedy.json"
        brute_out = tmp_path / "brute.json"
        assert (
            main(
                [
                    "select",
                    "--embeddings",
                    str(oracle_file),
                    "--query-id",
                    "query",
                    "--k",
                    "3",
                    "--mode",
                    "greedy",
                    "--lambda-div",
                    "1",
                    "--lambda-rel",
                    "0",
                    "--out",
                    str(greedy_out),
                ]
            )
            == 0
        )
        assert (
            main(
                [
                    "select",
                    "--embeddings",
                    str(oracle_file),
                    "--query-id",
                    "query",
                    "--k",
                    "3",
                    "--mode",
                    "bruteforce",
                    "--out",
                    str(brute_out),
                ]
            )
            == 0
        )
        greedy = json.loads(greedy_out.read_text())["result"]
        brute = json.loads(brute_out.read_text())["result"]
        assert sorted(greedy["selected_ids"]) == ["a", "b", "c"]
        assert sorted(brute["selected_ids"]) == ["a", "b", "c"]
        assert greedy["final_diversity"] == pytest.approx(3 * LN2, abs=1e-9)

    def test_k_zero_rejected(self, oracle_file, capsys):
        code = main(
            ["select", "--embeddings", str(oracle_file), "--query-id", "query", "--k", "0"]
        )
        assert code == 2
        assert "--k" in capsys.readouterr().err

    def test_bruteforce_budget_guard(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        items = [Embedding("query", np.eye(4)[0])]
        for i in range(45):
            v = rng.standard_normal(4)
            items.append(Embedding(f"p{i:02d}", v / np.linalg.norm(v)))
        path = tmp_path / "big.jsonl"
        save_embeddings(EmbeddingSet(items), path)
        code = main(
            [
                "select",
                "--embeddings",
                str(path),
                "--query-id",
                "query",
                "--k",
                "12",
                "--mode",
                "bruteforce",
            ]
        )
        assert code == 2
        assert str(math.comb(45, 12)) in capsys.readouterr().err


class TestEval:
    def test_metrics_of_orthogonal_set(self, oracle_file, tmp_path):
        out = tmp_path / "metrics.json"
        code = main(
            ["eval", "--embeddings", str(oracle_file), "--query-id", "query", "--out", str(out)]
        )
        assert code == 0
        metrics = json.loads(out.read_text())["metrics"]
        assert metrics["n"] == 4
        # 3 orthogonal items plus one duplicate: spectrum {2, 1, 1, 0} / 4
        expected = float(np.exp(-(np.array([0.5, 0.25, 0.25]) * np.log([0.5, 0.25, 0.25])).sum()))
        assert metrics["vendi"] == pytest.approx(expected, abs=1e-9)

    def test_top_m_out_of_range_exits_2(self, oracle_file):
        assert (
            main(
                [
                    "eval",
                    "--embeddings",
                    str(oracle_file),
                    "--query-id",
                    "query",
                    "--top-m",
                    "9",
                ]
            )
            == 2
        )


SMALL_CONFIG = {
    "version": 1,
    "world": {"n_modes": 3, "n_candidates": 12, "dim": 8, "sigma": 0.1, "seed": 5},
    "grpo": {"iterations": 40},
    "arms": [
        {"name": "composite", "lambda_div": 0.5, "lambda_rel": 0.5},
        {"name": "relevance-only", "lambda_div": 0.0, "lambda_rel": 1.0},
    ],
    "k": 3,
    "seeds": [0, 1],
}


class TestSimulate:
    def test_runs_and_writes_artifacts(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(SMALL_CONFIG))
        out = tmp_path / "run"
        csv_path = tmp_path / "table.csv"
        code = main(
            ["simulate", "--config", str(config), "--out", str(out), "--csv", str(csv_path)]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert {arm["name"] for arm in report["arms"]} == {"composite", "relevance-only"}
        assert report["config"]["seeds"] == [0, 1]
        assert (out / "config.json").exists()
        assert len((out / "runs.jsonl").read_text().splitlines()) == 4
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("arm,")

    def test_identical_runs_byte_identical(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(SMALL_CONFIG))
        outs = []
        for name in ("run1", "run2"):
            out = tmp_path / name
            assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
            outs.append(out)
        for artifact in ("report.json", "config.json", "runs.jsonl"):
            assert (outs[0] / artifact).read_bytes() == (outs[1] / artifact).read_bytes()

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({**SMALL_CONFIG, "lamda_div": 0.4}))
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")]) == 2
        assert "lamda_div" in capsys.readouterr().err

    def test_bad_epsilon_rejected_with_constraint(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({**SMALL_CONFIG, "grpo": {"clip_epsilon": 1.5}}))
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")]) == 2
        assert "(0, 1)" in capsys.readouterr().err

    def test_missing_version_rejected(self, tmp_path):
        config = tmp_path / "config.json"
        body = {k: v for k, v in SMALL_CONFIG.items() if k != "version"}
        config.write_text(json.dumps(body))
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")]) == 2

    def test_lambda_ablation_preset(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({**SMALL_CONFIG, "arms": "lambda-ablation"}))
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert [arm["name"] for arm in report["arms"]] == [
            "div0.9-rel0.1",
            "div0.5-rel0.5",
            "div0.1-rel0.9",
        ]

    def test_inputs_never_mutated(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(SMALL_CONFIG))
        before = config.read_bytes()
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "run")]) == 0
        assert config.read_bytes() == before


class TestTrainCommand:
    def test_writes_artifacts(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "version": 1,
                    "world": {"n_modes": 3, "n_candidates": 12, "dim": 8, "sigma": 0.1, "seed": 5},
                    "grpo": {"iterations": 30, "seed": 4},
                    "k": 3,
                }
            )
        )
        out = tmp_path / "run"
        assert main(["train", "--config", str(config), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["policy"]["bias"]) == 12
        assert len(report["rollout"]["selected_ids"]) == 3
        log_lines = (out / "training_log.jsonl").read_text().splitlines()
        assert len(log_lines) == 30
        first = json.loads(log_lines[0])
        assert set(first) == {"iteration", "objective", "mean_reward", "kl", "policy_entropy"}
