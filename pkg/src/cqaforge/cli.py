"""The `forge` command line.

A thin client of the service API: every subcommand builds a request, sends it
to the FastAPI app, and prints the JSON response. By default the app is
driven in-process (no sockets), so mock pipelines stay hermetic; pass
--server to target a running service instead.

Exit codes: 0 success, 1 config validation failure, 2 stage failure.
"""

from __future__ import annotations

import json
import sys
from typing import Any

import click
import httpx

from .pipeline import default_config


class ForgeClient:
    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        response = self._client.post(path, json=payload)
        if response.status_code >= 400:
            try:
                detail = response.json()
            except ValueError:
                detail = {"error": response.text}
            raise click.ClickException(detail.get("error") or json.dumps(detail))
        return response.json()


def _emit(payload: dict[str, Any]) -> None:
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


@click.group()
@click.option("--server", default=None, metavar="URL", help="Running service to target (default: in-process).")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Synthetic CQA datasets, masked tokenization, and judge-based evaluation."""
    ctx.obj = ForgeClient(server)


@main.command()
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path())
@click.option("--sidecar", default=None, type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def ingest(client: ForgeClient, root: str, out: str, sidecar: str | None) -> None:
    """Scan a directory of text documents into a manifest."""
    _emit(client.post("/corpus/ingest", {"root": root, "out": out, "sidecar": sidecar}))


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--window", default=1024, show_default=True)
@click.option("--overlap", default=64, show_default=True)
@click.option("--snap-tokens", default=32, show_default=True)
@click.option("--tokenizer", default="word", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def chunk(client: ForgeClient, manifest: str, window: int, overlap: int, snap_tokens: int, tokenizer: str, out: str) -> None:
    """Segment manifest documents into token-window chunks."""
    _emit(
        client.post(
            "/corpus/chunk",
            {
                "manifest": manifest,
                "window": window,
                "overlap": overlap,
                "snap_tokens": snap_tokens,
                "tokenizer": tokenizer,
                "out": out,
            },
        )
    )


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.pass_obj
def stats(client: ForgeClient, manifest: str) -> None:
    """Category/language distribution of a manifest."""
    _emit(client.post("/corpus/stats", {"manifest": manifest}))


@main.command()
@click.option("--chunks", required=True, type=click.Path(exists=True))
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--per-chunk", default=4, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--mock/--no-mock", default=True, show_default=True, help="Use the in-process mock endpoint.")
@click.option("--seed", default=0, show_default=True, help="Mock endpoint seed.")
@click.option("--endpoint-url", default="", help="Chat-completion base URL (http mode).")
@click.option("--model", default="", help="Model name for the http endpoint.")
@click.option("--max-workers", default=8, show_default=True)
@click.pass_obj
def generate(
    client: ForgeClient,
    chunks: str,
    manifest: str,
    per_chunk: int,
    out: str,
    mock: bool,
    seed: int,
    endpoint_url: str,
    model: str,
    max_workers: int,
) -> None:
    """Generate CQA triplets from chunks via a chat-completion endpoint."""
    endpoint = {"mode": "mock", "seed": seed} if mock else {"mode": "http", "base_url": endpoint_url, "model": model}
    _emit(
        client.post(
            "/synth/generate",
            {
                "chunks": chunks,
                "manifest": manifest,
                "per_chunk": per_chunk,
                "out": out,
                "endpoint": endpoint,
                "max_workers": max_workers,
            },
        )
    )


@main.command()
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--fraction", default=0.1, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def unanswerable(client: ForgeClient, input_path: str, fraction: float, seed: int, out: str) -> None:
    """Flip a fraction of triplets into cross-context unanswerable samples."""
    _emit(client.post("/synth/unanswerable", {"in": input_path, "fraction": fraction, "seed": seed, "out": out}))


@main.command()
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--test-size", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--train-out", required=True, type=click.Path())
@click.option("--test-out", required=True, type=click.Path())
@click.pass_obj
def split(client: ForgeClient, input_path: str, test_size: int, seed: int, train_out: str, test_out: str) -> None:
    """Seed-deterministic disjoint train/test split."""
    _emit(
        client.post(
            "/synth/split",
            {"in": input_path, "test_size": test_size, "seed": seed, "train_out": train_out, "test_out": test_out},
        )
    )


@main.command()
@click.option("--template", default="llama31", show_default=True)
@click.option("--in", "input_path", default=None, type=click.Path(exists=True), help="Triplet dataset (train mode).")
@click.option("--mode", type=click.Choice(["train", "infer", "judge"]), default="train", show_default=True)
@click.option("--out", default=None, type=click.Path(), help="Output file (train mode).")
@click.option("--context", default="", help="Context text (infer mode).")
@click.option("--question", default="", help="Question text (infer/judge mode).")
@click.option("--reference", default="", help="Reference answer (judge mode).")
@click.option("--candidate", default="", help="Candidate answer (judge mode).")
@click.pass_obj
def render(
    client: ForgeClient,
    template: str,
    input_path: str | None,
    mode: str,
    out: str | None,
    context: str,
    question: str,
    reference: str,
    candidate: str,
) -> None:
    """Render training samples, an inference prompt, or a judge prompt."""
    if mode == "train":
        if not input_path or not out:
            raise click.UsageError("train mode needs --in and --out")
        _emit(client.post("/render/train", {"in": input_path, "out": out, "template": template}))
    elif mode == "infer":
        _emit(client.post("/render/infer", {"context": context, "question": question, "template": template}))
    else:
        _emit(
            client.post(
                "/render/judge",
                {"question": question, "reference": reference, "candidate": candidate, "template": template},
            )
        )


@main.command()
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--tokenizer", default="byte", show_default=True)
@click.option("--template", default="llama31", show_default=True)
@click.option("--max-tokens", default=4096, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def tokenize(client: ForgeClient, input_path: str, tokenizer: str, template: str, max_tokens: int, out: str) -> None:
    """Tokenize rendered samples and mask instruction labels with -100."""
    _emit(
        client.post(
            "/tokenize",
            {"in": input_path, "tokenizer": tokenizer, "template": template, "max_tokens": max_tokens, "out": out},
        )
    )


@main.command(name="eval")
@click.option("--benchmark", required=True, type=click.Path(exists=True))
@click.option("--adapter", default="withheld", show_default=True)
@click.option("--model-endpoint", default="", help="Chat-completion base URL of the evaluated model.")
@click.option("--judge-endpoint", default="", help="Chat-completion base URL of the judge.")
@click.option("--model", default="", help="Evaluated model name.")
@click.option("--judge-model", default="", help="Judge model name.")
@click.option("--mock/--no-mock", default=False, show_default=True)
@click.option("--seed", default=0, show_default=True, help="Mock endpoint seed.")
@click.option("--k", "judgments", default=3, show_default=True)
@click.option("--score-min", default=0, show_default=True)
@click.option("--score-max", default=10, show_default=True)
@click.option("--field-maps", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def eval_cmd(
    client: ForgeClient,
    benchmark: str,
    adapter: str,
    model_endpoint: str,
    judge_endpoint: str,
    model: str,
    judge_model: str,
    mock: bool,
    seed: int,
    judgments: int,
    score_min: int,
    score_max: int,
    field_maps: str | None,
    out_dir: str,
) -> None:
    """Run a benchmark end to end and write the scorecard."""
    if mock:
        model_spec = {"mode": "mock", "seed": seed}
        judge_spec = {"mode": "mock", "seed": seed + 1}
    else:
        if not model_endpoint or not judge_endpoint:
            raise click.UsageError("provide --model-endpoint and --judge-endpoint, or --mock")
        model_spec = {"mode": "http", "base_url": model_endpoint, "model": model}
        judge_spec = {"mode": "http", "base_url": judge_endpoint, "model": judge_model}
    _emit(
        client.post(
            "/eval/run",
            {
                "benchmark": benchmark,
                "adapter": adapter,
                "out_dir": out_dir,
                "model_endpoint": model_spec,
                "judge_endpoint": judge_spec,
                "judgments": judgments,
                "score_min": score_min,
                "score_max": score_max,
                "field_maps": field_maps,
            },
        )
    )


@main.group()
def sweep() -> None:
    """Hyperparameter sweep utilities."""


@sweep.command()
@click.option("--spec", "spec_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def expand(client: ForgeClient, spec_path: str | None, out_dir: str) -> None:
    """Expand a sweep spec into one run-config file per combination."""
    _emit(client.post("/sweep/expand", {"spec_path": spec_path, "out_dir": out_dir}))


@sweep.command()
@click.option("--results", required=True, type=click.Path(exists=True))
@click.option("--runs", "runs_dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.pass_obj
def select(client: ForgeClient, results: str, runs_dir: str | None) -> None:
    """Pick the best run from a result log."""
    _emit(client.post("/sweep/select", {"results": results, "runs_dir": runs_dir}))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "output_dir", default=None, type=click.Path(), help="Override the configured output_dir.")
@click.pass_obj
def pipeline(client: ForgeClient, config_path: str, output_dir: str | None) -> None:
    """Run the full pipeline from a config file."""
    response = client.post("/pipeline/run", {"config_path": config_path, "output_dir": output_dir})
    _emit(response)
    if response["status"] == "invalid":
        sys.exit(1)
    if response["status"] == "failed":
        sys.exit(2)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.pass_obj
def validate(client: ForgeClient, config_path: str) -> None:
    """Validate a pipeline config; reports every violation."""
    report = client.post("/pipeline/validate", {"config_path": config_path})
    _emit(report)
    if not report["valid"]:
        sys.exit(1)


@main.command(name="init-config")
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--output-dir", default="runs/default", show_default=True)
@click.option("--out", required=True, type=click.Path())
def init_config(root: str, output_dir: str, out: str) -> None:
    """Write the default pipeline config wired to a corpus root."""
    import yaml

    config = default_config(root, output_dir)
    with open(out, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=False)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8742, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the service with uvicorn."""
    import uvicorn

    uvicorn.run("cqaforge.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
