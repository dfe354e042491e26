"""The forge CLI as an in-process thin client."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from cqaforge.cli import main

from conftest import write_fixture_corpus


@pytest.fixture
def runner():
    return CliRunner()


def test_ingest_then_chunk(runner, tmp_path):
    root = tmp_path / "corpus"
    sidecar = write_fixture_corpus(root)
    manifest = tmp_path / "manifest.jsonl"
    result = runner.invoke(
        main, ["ingest", "--root", str(root), "--sidecar", str(sidecar), "--out", str(manifest)]
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["documents"] == 5

    result = runner.invoke(
        main,
        ["chunk", "--manifest", str(manifest), "--window", "120", "--overlap", "16", "--out", str(tmp_path / "chunks.jsonl")],
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["chunks"] > 5


def test_generate_split_flow(runner, tmp_path):
    root = tmp_path / "corpus"
    write_fixture_corpus(root, with_sidecar=False)
    manifest, chunks, triplets = (tmp_path / n for n in ("m.jsonl", "c.jsonl", "t.jsonl"))
    assert runner.invoke(main, ["ingest", "--root", str(root), "--out", str(manifest)]).exit_code == 0
    assert (
        runner.invoke(
            main,
            ["chunk", "--manifest", str(manifest), "--window", "120", "--overlap", "16", "--out", str(chunks)],
        ).exit_code
        == 0
    )
    result = runner.invoke(
        main,
        [
            "generate", "--chunks", str(chunks), "--manifest", str(manifest),
            "--per-chunk", "2", "--seed", "3", "--out", str(triplets),
        ],
    )
    assert result.exit_code == 0, result.output
    n = json.loads(result.output)["triplets"]
    assert n >= 20

    result = runner.invoke(
        main,
        [
            "split", "--in", str(triplets), "--test-size", "5", "--seed", "4",
            "--train-out", str(tmp_path / "train.jsonl"), "--test-out", str(tmp_path / "test.jsonl"),
        ],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload == {"train": n - 5, "test": 5}


def test_render_infer(runner):
    result = runner.invoke(main, ["render", "--mode", "infer", "--context", "ctx-1", "--question", "q-1"])
    assert result.exit_code == 0
    assert "ctx-1" in json.loads(result.output)["prompt"]


def test_init_config_and_validate(runner, tmp_path):
    root = tmp_path / "corpus"
    write_fixture_corpus(root, with_sidecar=False)
    config_path = tmp_path / "config.yaml"
    result = runner.invoke(
        main, ["init-config", "--root", str(root), "--output-dir", str(tmp_path / "out"), "--out", str(config_path)]
    )
    assert result.exit_code == 0
    result = runner.invoke(main, ["validate", "--config", str(config_path)])
    assert result.exit_code == 0, result.output

    config_path.write_text(
        config_path.read_text(encoding="utf-8").replace("unanswerable_fraction: 0.1", "unanswerable_fraction: 3.5"),
        encoding="utf-8",
    )
    result = runner.invoke(main, ["validate", "--config", str(config_path)])
    assert result.exit_code == 1
    assert json.loads(result.output)["valid"] is False


def test_pipeline_exit_codes(runner, tmp_path):
    root = tmp_path / "corpus"
    write_fixture_corpus(root, with_sidecar=False)
    config_path = tmp_path / "config.yaml"
    runner.invoke(
        main, ["init-config", "--root", str(root), "--output-dir", str(tmp_path / "out"), "--out", str(config_path)]
    )
    text = config_path.read_text(encoding="utf-8").replace("window: 1024", "window: 120").replace("overlap: 64", "overlap: 16")
    config_path.write_text(text, encoding="utf-8")

    result = runner.invoke(main, ["pipeline", "--config", str(config_path)])
    assert result.exit_code == 0, result.output

    config_path.write_text(text.replace("test_size: 8", "test_size: -2"), encoding="utf-8")
    result = runner.invoke(main, ["pipeline", "--config", str(config_path)])
    assert result.exit_code == 1


def test_sweep_commands(runner, tmp_path):
    result = runner.invoke(main, ["sweep", "expand", "--out", str(tmp_path / "runs")])
    assert result.exit_code == 0
    assert json.loads(result.output)["count"] == 12

    results = tmp_path / "results.jsonl"
    results.write_text('{"run_id": "A", "percent_score": 70}\n', encoding="utf-8")
    result = runner.invoke(main, ["sweep", "select", "--results", str(results)])
    assert result.exit_code == 0
    assert json.loads(result.output)["best_run_id"] == "A"
