"""Service routes wrapping the core package operations."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import APIRouter, HTTPException

from .. import __version__, chatform, corpus, evalharness, pipeline, synthgen, tokmask
from ..endpoints import ChatEndpoint, HttpChatEndpoint, MockChatEndpoint
from ..errors import ConfigError, ForgeError
from ..records import iter_jsonl, write_json, write_jsonl
from ..sweepgen import SweepSpec, expand_sweep, read_results, read_run_configs, select_best, write_run_configs
from ..tokenizers import build_tokenizer
from . import schemas

router = APIRouter()


def _endpoint_from_spec(spec: schemas.EndpointSpec, mock_mode: str) -> ChatEndpoint:
    if spec.mode == "mock":
        return MockChatEndpoint(mode=mock_mode, seed=spec.seed)
    if spec.mode == "http":
        if not spec.base_url:
            raise ConfigError("http endpoint needs a base_url")
        return HttpChatEndpoint(base_url=spec.base_url, model=spec.model, api_key_env=spec.api_key_env)
    raise ConfigError(f"unknown endpoint mode {spec.mode!r}")


@router.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@router.post("/corpus/ingest", response_model=schemas.IngestResponse)
def corpus_ingest(request: schemas.IngestRequest) -> schemas.IngestResponse:
    documents, errors = corpus.ingest_documents(request.root, request.sidecar)
    corpus.write_manifest(request.out, documents)
    return schemas.IngestResponse(
        documents=len(documents),
        companies=len({d.company for d in documents}),
        errors=[{"source_path": e.source_path, "error": e.error} for e in errors],
        manifest_path=request.out,
    )


@router.post("/corpus/chunk", response_model=schemas.ChunkResponse)
def corpus_chunk(request: schemas.ChunkRequest) -> schemas.ChunkResponse:
    documents = corpus.read_manifest(request.manifest)
    tokenizer = build_tokenizer(request.tokenizer)
    chunks = []
    for doc in documents:
        chunks.extend(
            corpus.chunk_document(
                doc, tokenizer, window=request.window, overlap=request.overlap, snap_tokens=request.snap_tokens
            )
        )
    corpus.write_chunks(request.out, chunks)
    return schemas.ChunkResponse(documents=len(documents), chunks=len(chunks), chunks_path=request.out)


@router.post("/corpus/stats")
def corpus_stats(request: schemas.StatsRequest) -> dict:
    return corpus.corpus_stats(corpus.read_manifest(request.manifest))


@router.post("/synth/generate", response_model=schemas.GenerateResponse)
def synth_generate(request: schemas.GenerateRequest) -> schemas.GenerateResponse:
    chunks = corpus.read_chunks(request.chunks)
    documents = corpus.read_manifest(request.manifest)
    endpoint = _endpoint_from_spec(request.endpoint, "generate")
    triplets, failures = synthgen.generate_dataset(
        chunks, documents, request.per_chunk, endpoint, max_workers=request.max_workers
    )
    synthgen.write_triplets(request.out, triplets)
    if failures:
        write_jsonl(
            str(request.out) + ".failures.jsonl",
            ({"doc_id": f.doc_id, "chunk_index": f.chunk_index, "error": f.error} for f in failures),
        )
    return schemas.GenerateResponse(triplets=len(triplets), failed_chunks=len(failures), out_path=request.out)


@router.post("/synth/unanswerable", response_model=schemas.UnanswerableResponse)
def synth_unanswerable(request: schemas.UnanswerableRequest) -> schemas.UnanswerableResponse:
    dataset = synthgen.make_unanswerable(synthgen.read_triplets(request.input), request.fraction, request.seed)
    synthgen.write_triplets(request.out, dataset)
    return schemas.UnanswerableResponse(
        samples=len(dataset),
        unanswerable=sum(1 for t in dataset if not t.answerable),
        out_path=request.out,
    )


@router.post("/synth/split", response_model=schemas.SplitResponse)
def synth_split(request: schemas.SplitRequest) -> schemas.SplitResponse:
    dataset = synthgen.read_triplets(request.input)
    train, test = synthgen.split_dataset(dataset, synthgen.SplitSpec(test_size=request.test_size, seed=request.seed))
    synthgen.write_triplets(request.train_out, train)
    synthgen.write_triplets(request.test_out, test)
    return schemas.SplitResponse(train=len(train), test=len(test))


@router.post("/render/train", response_model=schemas.RenderTrainResponse)
def render_train(request: schemas.RenderTrainRequest) -> schemas.RenderTrainResponse:
    template = chatform.load_template(request.template)
    rendered = [chatform.render_training_sample(t, template) for t in synthgen.read_triplets(request.input)]
    write_jsonl(request.out, (r.to_record() for r in rendered))
    return schemas.RenderTrainResponse(rendered=len(rendered), out_path=request.out)


@router.post("/render/infer", response_model=schemas.RenderedPrompt)
def render_infer(request: schemas.RenderInferRequest) -> schemas.RenderedPrompt:
    template = chatform.load_template(request.template)
    return schemas.RenderedPrompt(prompt=chatform.render_inference_prompt(request.context, request.question, template))


@router.post("/render/judge", response_model=schemas.RenderedPrompt)
def render_judge(request: schemas.RenderJudgeRequest) -> schemas.RenderedPrompt:
    template = chatform.load_template(request.template)
    prompt = chatform.render_judge_prompt(
        request.question,
        request.reference,
        request.candidate,
        template,
        score_min=request.score_min,
        score_max=request.score_max,
    )
    return schemas.RenderedPrompt(prompt=prompt)


@router.post("/tokenize", response_model=schemas.TokenizeResponse)
def tokenize(request: schemas.TokenizeRequest) -> schemas.TokenizeResponse:
    template = chatform.load_template(request.template)
    tok = build_tokenizer(request.tokenizer, special_tokens=template.markers)
    rendered = [chatform.RenderedSample.from_record(record) for _, record in iter_jsonl(request.input)]
    samples = []
    rejections = []
    for sample in rendered:
        try:
            samples.append(tokmask.tokenize_and_mask(sample, tok, max_tokens=request.max_tokens))
        except ForgeError as exc:
            rejections.append({"sample_id": sample.sample_id, "error": str(exc)})
    if not samples:
        raise ConfigError("every sample was rejected during tokenization")
    manifest = tokmask.write_dataset(samples, request.out)
    return schemas.TokenizeResponse(
        samples=manifest["sample_count"],
        tokens=manifest["token_count"],
        rejections=rejections,
        out_path=request.out,
    )


@router.post("/loss/masked-cross-entropy", response_model=schemas.LossResponse)
def masked_cross_entropy(request: schemas.LossRequest) -> schemas.LossResponse:
    logits = np.asarray(request.logits, dtype=np.float64)
    terms = tokmask.masked_cross_entropy_terms(logits, request.labels)
    if not terms:
        raise ConfigError("no trainable positions: every label is IGNORE")
    loss = sum(value for _, value in terms) / len(terms)
    per_position = None
    if request.per_position:
        per_position = [{"index": float(index), "term": value} for index, value in terms]
    return schemas.LossResponse(loss=loss, term_count=len(terms), per_position=per_position)


@router.post("/eval/run", response_model=schemas.EvalResponse)
def eval_run(request: schemas.EvalRequest) -> schemas.EvalResponse:
    field_maps = evalharness.load_field_maps(request.field_maps)
    items, malformed = evalharness.load_benchmark(request.benchmark, request.adapter, field_maps)
    template = chatform.load_template(request.template)
    settings = evalharness.EvalSettings(
        judgments=request.judgments,
        score_min=request.score_min,
        score_max=request.score_max,
        max_workers=request.max_workers,
    )
    scorecard = evalharness.run_benchmark(
        items,
        _endpoint_from_spec(request.model_endpoint, "answer"),
        _endpoint_from_spec(request.judge_endpoint, "judge"),
        template,
        benchmark=request.adapter,
        settings=settings,
    )
    out_dir = Path(request.out_dir)
    write_json(out_dir / "scorecard.json", scorecard.to_record())
    evalharness.write_histogram_csv(out_dir / "histogram.csv", scorecard.histogram)
    evalharness.write_verdicts(out_dir / "verdicts.jsonl", scorecard.per_question)
    return schemas.EvalResponse(
        benchmark=scorecard.benchmark,
        n_questions=scorecard.n_questions,
        percent_score=scorecard.percent_score,
        histogram={str(k): v for k, v in sorted(scorecard.histogram.items())},
        excluded_failed_generation=scorecard.excluded_failed_generation,
        excluded_invalid_judgment=scorecard.excluded_invalid_judgment,
        malformed_rows=len(malformed),
        out_dir=str(out_dir),
    )


@router.post("/sweep/expand", response_model=schemas.SweepExpandResponse)
def sweep_expand(request: schemas.SweepExpandRequest) -> schemas.SweepExpandResponse:
    if request.spec_path:
        spec = SweepSpec.from_file(request.spec_path)
    elif request.spec is not None:
        kwargs = {k: v for k, v in request.spec.items() if k in SweepSpec.__dataclass_fields__}
        spec = SweepSpec(**kwargs)
    else:
        spec = SweepSpec()
    configs = expand_sweep(spec)
    write_run_configs(configs, request.out_dir)
    return schemas.SweepExpandResponse(
        count=len(configs), run_ids=[c.run_id for c in configs], out_dir=request.out_dir
    )


@router.post("/sweep/select", response_model=schemas.SweepSelectResponse)
def sweep_select(request: schemas.SweepSelectRequest) -> schemas.SweepSelectResponse:
    results = read_results(request.results)
    configs = read_run_configs(request.runs_dir) if request.runs_dir else ()
    report = select_best(results, configs)
    return schemas.SweepSelectResponse(**report)


@router.post("/pipeline/validate", response_model=schemas.ValidationReport)
def pipeline_validate(request: schemas.ValidateRequest) -> schemas.ValidationReport:
    config = _resolve_config(request.config_path, request.config)
    violations = pipeline.validate_config(config)
    return schemas.ValidationReport(valid=not violations, violations=violations)


@router.post("/pipeline/run", response_model=schemas.PipelineResponse)
def pipeline_run(request: schemas.PipelineRequest) -> schemas.PipelineResponse:
    config = _resolve_config(request.config_path, request.config)
    violations = pipeline.validate_config(config)
    if violations:
        return schemas.PipelineResponse(
            status="invalid",
            error=f"{len(violations)} config violation(s)",
            summary={"violations": violations},
        )
    try:
        summary = pipeline.run_pipeline(config, output_dir=request.output_dir)
    except pipeline.StageFailure as exc:
        return schemas.PipelineResponse(status="failed", failed_stage=exc.stage, error=str(exc))
    return schemas.PipelineResponse(status="completed", summary=summary)


def _resolve_config(config_path: str | None, config: dict | None) -> dict:
    if config_path:
        return pipeline.load_config_file(config_path)
    if config is not None:
        return config
    raise ConfigError("provide config_path or an inline config")


@router.post("/v1/chat/completions")
def chat_completions(request: schemas.ChatCompletionRequest) -> dict:
    """Mock chat-completion wire endpoint (model name picks the mock mode)."""
    mode = {"mock-generate": "generate", "mock-answer": "answer", "mock-judge": "judge"}.get(
        request.model, "answer"
    )
    endpoint = MockChatEndpoint(mode=mode, seed=request.seed or 0)
    content = endpoint.complete(
        [m.model_dump() for m in request.messages],
        temperature=request.temperature,
        max_tokens=request.max_tokens,
        top_p=request.top_p,
    )
    return {
        "id": "mock-completion",
        "object": "chat.completion",
        "model": request.model,
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
    }
