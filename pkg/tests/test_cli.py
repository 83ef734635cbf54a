import json
import os

import pytest
from click.testing import CliRunner

from typelink.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory, runner):
    out = tmp_path_factory.mktemp("cli_world")
    result = runner.invoke(
        main,
        [
            "synth", "--seed", "5", "--out", str(out),
            "--entities", "300", "--mention-strings", "70", "--documents", "40", "--context-axes", "20",
        ],
    )
    assert result.exit_code == 0, result.output
    return out


def run_ok(runner, args):
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return result


class TestSynthIngest:
    def test_synth_writes_world_files(self, world_dir):
        for name in ("entities.tsv", "edges.tsv", "links.tsv", "corpus.jsonl", "latent_system.json", "pool.json"):
            assert (world_dir / name).exists()

    def test_synth_is_deterministic_on_disk(self, tmp_path, runner):
        args = ["--entities", "150", "--mention-strings", "30", "--documents", "10", "--context-axes", "5"]
        a, b = tmp_path / "a", tmp_path / "b"
        run_ok(runner, ["synth", "--seed", "3", "--out", str(a), *args])
        run_ok(runner, ["synth", "--seed", "3", "--out", str(b), *args])
        for name in ("entities.tsv", "edges.tsv", "links.tsv", "corpus.jsonl", "latent_system.json", "pool.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_ingest_summary_and_normalised_copy(self, world_dir, runner, tmp_path):
        out = tmp_path / "normalised"
        result = run_ok(
            runner,
            [
                "ingest", "--graph", str(world_dir), "--links", str(world_dir / "links.tsv"),
                "--corpus", str(world_dir / "corpus.jsonl"), "--out", str(out),
            ],
        )
        summary = json.loads(result.output)
        assert summary["entities"] > 0
        # normalised copy round-trips byte-identically (synth already writes sorted)
        assert (out / "entities.tsv").read_bytes() == (world_dir / "entities.tsv").read_bytes()
        assert (out / "links.tsv").read_bytes() == (world_dir / "links.tsv").read_bytes()

    def test_ingest_rejects_bad_world(self, runner, tmp_path):
        (tmp_path / "entities.tsv").write_text("0\tx\n")
        (tmp_path / "edges.tsv").write_text("0\tinstance_of\t0\n")
        (tmp_path / "links.tsv").write_text("")
        result = runner.invoke(
            main, ["ingest", "--graph", str(tmp_path), "--links", str(tmp_path / "links.tsv")]
        )
        assert result.exit_code != 0
        assert "self-loop" in result.output


class TestSimplifyCommand:
    def test_report_and_figure(self, world_dir, runner, tmp_path):
        report = tmp_path / "report.tsv"
        out = tmp_path / "simplified.tsv"
        result = run_ok(
            runner,
            [
                "simplify", "--graph", str(world_dir), "--links", str(world_dir / "links.tsv"),
                "--out", str(out), "--report", str(report),
            ],
        )
        info = json.loads(result.output)
        assert info["replacements"] > 0
        lines = report.read_text().strip().splitlines()
        assert lines[0].split("\t") == ["step", "replacements", "links_changed"]
        assert lines[-1].split("\t")[1] == "0"  # final iteration folds nothing
        assert (tmp_path / "report.png").exists()

    def test_no_figures_flag(self, world_dir, runner, tmp_path):
        report = tmp_path / "r.tsv"
        run_ok(
            runner,
            [
                "simplify", "--graph", str(world_dir), "--links", str(world_dir / "links.tsv"),
                "--out", str(tmp_path / "s.tsv"), "--report", str(report), "--no-figures",
            ],
        )
        assert not (tmp_path / "r.png").exists()


@pytest.fixture(scope="module")
def search_artifacts(world_dir, runner, tmp_path_factory):
    out = tmp_path_factory.mktemp("search")
    result = run_ok(
        runner,
        [
            "search", "--method", "greedy", "--graph", str(world_dir),
            "--links", str(world_dir / "links.tsv"), "--corpus", str(world_dir / "corpus.jsonl"),
            "--pool", str(world_dir / "pool.json"), "--out", str(out / "system.json"),
            "--trace", str(out / "trace.tsv"), "--seed", "3",
        ],
    )
    return out, json.loads(result.output)


class TestSearchCommand:
    def test_outputs_exist(self, search_artifacts):
        out, summary = search_artifacts
        assert (out / "system.json").exists()
        assert (out / "trace.tsv").exists()
        assert (out / "trace.png").exists()
        assert summary["axes"] >= 1

    def test_trace_j_non_decreasing(self, search_artifacts):
        out, _ = search_artifacts
        lines = (out / "trace.tsv").read_text().strip().splitlines()[1:]
        js = [float(line.split("\t")[1]) for line in lines]
        assert all(a <= b + 1e-15 for a, b in zip(js, js[1:]))

    def test_learnability_report_reuse(self, world_dir, runner, tmp_path, search_artifacts):
        report = tmp_path / "learn.tsv"
        run_ok(
            runner,
            [
                "learnability", "--graph", str(world_dir), "--corpus", str(world_dir / "corpus.jsonl"),
                "--axes", str(world_dir / "pool.json"), "--out", str(report), "--seed", "0",
            ],
        )
        result = run_ok(
            runner,
            [
                "search", "--method", "greedy", "--graph", str(world_dir),
                "--links", str(world_dir / "links.tsv"), "--corpus", str(world_dir / "corpus.jsonl"),
                "--pool", str(world_dir / "pool.json"), "--out", str(tmp_path / "system.json"),
                "--learnability-report", str(report), "--seed", "3",
            ],
        )
        assert json.loads(result.output)["axes"] >= 1

    def test_random_method_reports_baseline(self, world_dir, runner, tmp_path):
        result = run_ok(
            runner,
            [
                "search", "--method", "random", "--graph", str(world_dir),
                "--links", str(world_dir / "links.tsv"), "--corpus", str(world_dir / "corpus.jsonl"),
                "--pool", str(world_dir / "pool.json"), "--out", str(tmp_path / "unused.json"),
                "--random-k", "4", "--random-trials", "20", "--seed", "1",
            ],
        )
        summary = json.loads(result.output)
        assert 0.0 <= summary["mean_accuracy"] <= 1.0
        assert summary["trials"] == 20


class TestEvaluateCommand:
    def test_empty_system_prints_baseline(self, world_dir, runner):
        result = run_ok(
            runner,
            [
                "evaluate", "--graph", str(world_dir), "--links", str(world_dir / "links.tsv"),
                "--corpus", str(world_dir / "corpus.jsonl"),
            ],
        )
        body = json.loads(result.output)
        assert body["axis_count"] == 0
        assert body["s_oracle"] == body["s_greedy"]
        assert body["j"] == body["s_greedy"]["value"]

    def test_latent_system_evaluation(self, world_dir, runner):
        result = run_ok(
            runner,
            [
                "evaluate", "--graph", str(world_dir), "--links", str(world_dir / "links.tsv"),
                "--corpus", str(world_dir / "corpus.jsonl"), "--system", str(world_dir / "latent_system.json"),
            ],
        )
        body = json.loads(result.output)
        assert body["s_oracle"]["value"] >= body["s_greedy"]["value"]


class TestTrainLinkCommands:
    def test_train_then_link(self, world_dir, runner, tmp_path, search_artifacts):
        out, _ = search_artifacts
        model = tmp_path / "model.json"
        result = run_ok(
            runner,
            [
                "train", "--graph", str(world_dir), "--corpus", str(world_dir / "corpus.jsonl"),
                "--system", str(out / "system.json"), "--out", str(model),
                "--lr", "0.002", "--epochs", "15", "--seed", "5",
            ],
        )
        info = json.loads(result.output)
        assert info["final_loss"] < info["first_loss"]
        decisions = tmp_path / "decisions.jsonl"
        result = run_ok(
            runner,
            [
                "link", "--graph", str(world_dir), "--links", str(world_dir / "links.tsv"),
                "--corpus", str(world_dir / "corpus.jsonl"), "--model", str(model),
                "--system", str(out / "system.json"), "--fit-corpus", str(world_dir / "corpus.jsonl"),
                "--out", str(decisions),
            ],
        )
        info = json.loads(result.output)
        assert info["decisions"] > 0
        assert info["accuracy"]["value"] >= info["s_greedy"]["value"]
        rows = [json.loads(line) for line in decisions.read_text().splitlines()]
        assert all(len(r["scores"]) <= 5 for r in rows)

    def test_predict_dumps_beliefs(self, world_dir, runner, tmp_path, search_artifacts):
        out, _ = search_artifacts
        model = tmp_path / "model.json"
        run_ok(
            runner,
            [
                "train", "--graph", str(world_dir), "--corpus", str(world_dir / "corpus.jsonl"),
                "--system", str(out / "system.json"), "--out", str(model), "--epochs", "2", "--seed", "1",
            ],
        )
        beliefs = tmp_path / "beliefs.jsonl"
        result = run_ok(
            runner,
            ["predict", "--corpus", str(world_dir / "corpus.jsonl"), "--model", str(model),
             "--out", str(beliefs)],
        )
        info = json.loads(result.output)
        first = json.loads(beliefs.read_text().splitlines()[0])
        assert set(first["beliefs"]) == set(first["axes"])
        axis = first["axes"][0]
        row = first["beliefs"][axis][0]
        assert abs(sum(row) - 1.0) < 1e-9
        assert info["documents"] > 0


class TestLambdaSweep:
    def test_sweep_outputs_and_monotone_sizes(self, world_dir, runner, tmp_path):
        out = tmp_path / "sweep.tsv"
        result = run_ok(
            runner,
            [
                "lambda-sweep", "--graph", str(world_dir), "--links", str(world_dir / "links.tsv"),
                "--corpus", str(world_dir / "corpus.jsonl"), "--pool", str(world_dir / "pool.json"),
                "--method", "greedy", "--lambdas", "1e-2,1e-4", "--seeds", "2", "--out", str(out),
            ],
        )
        summary = json.loads(result.output)
        sizes = summary["sizes_median"]
        assert sizes[0] <= sizes[-1]  # larger penalty, smaller system
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3  # header + two lambda rows
        assert (tmp_path / "sweep.png").exists()
        assert (tmp_path / "sweep.runs.tsv").exists()

    def test_single_lambda_two_seeds_aggregates(self, world_dir, runner, tmp_path):
        out = tmp_path / "one.tsv"
        run_ok(
            runner,
            [
                "lambda-sweep", "--graph", str(world_dir), "--links", str(world_dir / "links.tsv"),
                "--corpus", str(world_dir / "corpus.jsonl"), "--pool", str(world_dir / "pool.json"),
                "--method", "cem", "--lambdas", "1e-4", "--seeds", "2", "--out", str(out),
                "--cem-samples", "30", "--cem-elite", "6", "--cem-max-iters", "20", "--no-figures",
            ],
        )
        runs = (tmp_path / "one.runs.tsv").read_text().strip().splitlines()
        assert len(runs) == 3  # header + two seeded runs
