"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class IngestRequest(BaseModel):
    root: str
    out: str
    sidecar: Optional[str] = None


class IngestResponse(BaseModel):
    documents: int
    companies: int
    errors: list[dict[str, str]]
    manifest_path: str


class ChunkRequest(BaseModel):
    manifest: str
    out: str
    window: int = 1024
    overlap: int = 64
    snap_tokens: int = 32
    tokenizer: str = "word"


class ChunkResponse(BaseModel):
    documents: int
    chunks: int
    chunks_path: str


class StatsRequest(BaseModel):
    manifest: str


class GenerateRequest(BaseModel):
    chunks: str
    manifest: str
    out: str
    per_chunk: int = 4
    endpoint: "EndpointSpec"
    max_workers: int = 8


class EndpointSpec(BaseModel):
    mode: str = "mock"  # mock | http
    seed: int = 0
    base_url: str = ""
    model: str = ""
    api_key_env: str = "CQAFORGE_API_KEY"


class GenerateResponse(BaseModel):
    triplets: int
    failed_chunks: int
    out_path: str


class UnanswerableRequest(BaseModel):
    input: str = Field(alias="in")
    out: str
    fraction: float = 0.1
    seed: int

    model_config = {"populate_by_name": True}


class UnanswerableResponse(BaseModel):
    samples: int
    unanswerable: int
    out_path: str


class SplitRequest(BaseModel):
    input: str = Field(alias="in")
    train_out: str
    test_out: str
    test_size: int
    seed: int

    model_config = {"populate_by_name": True}


class SplitResponse(BaseModel):
    train: int
    test: int


class RenderTrainRequest(BaseModel):
    input: str = Field(alias="in")
    out: str
    template: str = "llama31"

    model_config = {"populate_by_name": True}


class RenderTrainResponse(BaseModel):
    rendered: int
    out_path: str


class RenderInferRequest(BaseModel):
    context: str
    question: str
    template: str = "llama31"


class RenderJudgeRequest(BaseModel):
    question: str
    reference: str
    candidate: str
    template: str = "llama31"
    score_min: int = 0
    score_max: int = 10


class RenderedPrompt(BaseModel):
    prompt: str


class TokenizeRequest(BaseModel):
    input: str = Field(alias="in")
    out: str
    tokenizer: str = "byte"
    template: str = "llama31"
    max_tokens: int = 4096

    model_config = {"populate_by_name": True}


class TokenizeResponse(BaseModel):
    samples: int
    tokens: int
    rejections: list[dict[str, str]]
    out_path: str


class LossRequest(BaseModel):
    logits: list[list[float]]
    labels: list[int]
    per_position: bool = False


class LossResponse(BaseModel):
    loss: float
    term_count: int
    per_position: Optional[list[dict[str, float]]] = None


class EvalRequest(BaseModel):
    benchmark: str
    adapter: str = "withheld"
    out_dir: str
    model_endpoint: EndpointSpec
    judge_endpoint: EndpointSpec
    template: str = "llama31"
    judgments: int = 3
    score_min: int = 0
    score_max: int = 10
    field_maps: Optional[str] = None
    max_workers: int = 8


class EvalResponse(BaseModel):
    benchmark: str
    n_questions: int
    percent_score: float
    histogram: dict[str, int]
    excluded_failed_generation: int
    excluded_invalid_judgment: int
    malformed_rows: int
    out_dir: str


class SweepExpandRequest(BaseModel):
    out_dir: str
    spec_path: Optional[str] = None
    spec: Optional[dict[str, Any]] = None


class SweepExpandResponse(BaseModel):
    count: int
    run_ids: list[str]
    out_dir: str


class SweepSelectRequest(BaseModel):
    results: str
    runs_dir: Optional[str] = None


class SweepSelectResponse(BaseModel):
    best_run_id: str
    best_score: float
    margin: float
    n_results: int


class ValidateRequest(BaseModel):
    config_path: Optional[str] = None
    config: Optional[dict[str, Any]] = None


class ValidationReport(BaseModel):
    valid: bool
    violations: list[dict[str, str]]


class PipelineRequest(BaseModel):
    config_path: Optional[str] = None
    config: Optional[dict[str, Any]] = None
    output_dir: Optional[str] = None


class PipelineResponse(BaseModel):
    status: str
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    summary: Optional[dict[str, Any]] = None


class ChatMessage(BaseModel):
    role: str
    content: str


class ChatCompletionRequest(BaseModel):
    model: str = "mock-answer"
    messages: list[ChatMessage]
    temperature: float = 0.0
    top_p: Optional[float] = None
    max_tokens: Optional[int] = None
    seed: Optional[int] = None


class HealthResponse(BaseModel):
    status: str
    version: str
