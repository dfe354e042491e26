"""Synthetic Context-Question-Answer triplet generation.

Triplets are produced by prompting a chat-completion endpoint per chunk with
a strict QUESTION:/ANSWER: block format; malformed blocks are dropped, never
repaired. Unanswerable samples are constructed by pairing a triplet's context
with a question generated against a different chunk, so the question is
off-context by construction.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

from .corpus import Chunk, Document
from .endpoints import ChatEndpoint, call_with_retries, map_bounded
from .errors import ConfigError, DatasetError, EndpointError
from .records import iter_jsonl, write_jsonl

log = logging.getLogger(__name__)

DEFAULT_QUESTIONS_PER_CHUNK = 4
DEFAULT_UNANSWERABLE_FRACTION = 0.10
UNANSWERABLE_TEMPLATE = "This question cannot be answered from the provided context."

GENERATION_PROMPT = """\
You are building a question answering dataset from financial documents.
Read the context below and write {n} question-answer pairs about it.

Rules:
- Every question must be answerable from the context alone.
- Write the questions and answers in the language of the context ({language}).
- Use exactly this format for every pair and nothing else:
QUESTION: <one question on a single line>
ANSWER: <the answer>

Context:
{context}"""


@dataclass
class CqaTriplet:
    sample_id: str
    context: str
    question: str
    answer: str
    answerable: bool
    language: str
    company: str
    category: str
    split: str = "unassigned"
    # provenance: which chunk the context comes from, and which chunk the
    # question was generated against (differs only for unanswerable samples)
    doc_id: str = ""
    chunk_index: int = 0
    question_origin: str = ""

    def to_record(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "CqaTriplet":
        return cls(**{f: record[f] for f in cls.__dataclass_fields__ if f in record})


@dataclass(frozen=True)
class SplitSpec:
    test_size: int
    seed: int


@dataclass
class GenerationFailure:
    doc_id: str
    chunk_index: int
    error: str


def chunk_key(doc_id: str, chunk_index: int) -> str:
    return f"{doc_id}/c{chunk_index:04d}"


def parse_qa_blocks(raw: str) -> tuple[list[tuple[str, str]], int]:
    """Parse QUESTION:/ANSWER: blocks; returns (pairs, dropped_count).

    A pair is kept only when both fields are present and non-empty; anything
    else is dropped, not repaired.
    """
    pairs: list[tuple[str, str]] = []
    dropped = 0
    question: str | None = None
    answer_lines: list[str] | None = None

    def flush():
        nonlocal question, answer_lines, dropped
        if question is None and answer_lines is None:
            return
        answer = "\n".join(answer_lines).strip() if answer_lines is not None else ""
        if question and answer:
            pairs.append((question, answer))
        else:
            dropped += 1
        question, answer_lines = None, None

    for line in raw.splitlines():
        stripped = line.strip()
        if stripped.startswith("QUESTION:"):
            flush()
            question = stripped[len("QUESTION:") :].strip()
        elif stripped.startswith("ANSWER:"):
            if answer_lines is not None:
                flush()
            answer_lines = [stripped[len("ANSWER:") :].strip()]
        elif answer_lines is not None:
            answer_lines.append(line)
    flush()
    return pairs, dropped


def normalize_question(question: str) -> str:
    return " ".join(question.lower().split())


def generate_triplets(
    chunk: Chunk,
    n_questions: int,
    endpoint: ChatEndpoint,
    meta: Document | None = None,
    prompt_template: str = GENERATION_PROMPT,
    retries: int = 3,
    backoff_s: float = 0.5,
) -> list[CqaTriplet]:
    """Generate up to n_questions triplets for one chunk.

    The context of every triplet is the chunk text verbatim; questions are
    deduplicated by whitespace/case-normalized exact match.
    """
    if n_questions < 1:
        raise ConfigError(f"n_questions must be >= 1, got {n_questions}")
    language = meta.language if meta else "und"
    prompt = prompt_template.format(n=n_questions, language=language, context=chunk.text)
    raw = call_with_retries(
        lambda: endpoint.complete(
            [{"role": "user", "content": prompt}],
            temperature=0.7,
        ),
        retries=retries,
        backoff_s=backoff_s,
    )
    pairs, dropped = parse_qa_blocks(raw)
    if dropped:
        log.warning("%s: dropped %d malformed QA blocks", chunk_key(chunk.doc_id, chunk.chunk_index), dropped)
    if not pairs:
        log.warning("%s: endpoint output contained no well-formed QA pair", chunk_key(chunk.doc_id, chunk.chunk_index))
        return []

    triplets = []
    seen: set[str] = set()
    origin = chunk_key(chunk.doc_id, chunk.chunk_index)
    for question, answer in pairs:
        normalized = normalize_question(question)
        if normalized in seen:
            continue
        seen.add(normalized)
        triplets.append(
            CqaTriplet(
                sample_id=f"{origin}/q{len(triplets):02d}",
                context=chunk.text,
                question=question,
                answer=answer,
                answerable=True,
                language=language,
                company=meta.company if meta else "unknown",
                category=meta.category if meta else "corporate report",
                doc_id=chunk.doc_id,
                chunk_index=chunk.chunk_index,
                question_origin=origin,
            )
        )
    return triplets


def generate_dataset(
    chunks: Sequence[Chunk],
    documents: Sequence[Document],
    n_questions: int,
    endpoint: ChatEndpoint,
    max_workers: int = 8,
    retries: int = 3,
    backoff_s: float = 0.5,
) -> tuple[list[CqaTriplet], list[GenerationFailure]]:
    """Run generation across chunks with bounded parallelism.

    Endpoint failures become chunk-level failure records; the dataset is
    ordered by sample_id regardless of completion order.
    """
    docs_by_id = {d.doc_id: d for d in documents}

    def one(chunk: Chunk) -> list[CqaTriplet] | GenerationFailure:
        try:
            return generate_triplets(
                chunk,
                n_questions,
                endpoint,
                meta=docs_by_id.get(chunk.doc_id),
                retries=retries,
                backoff_s=backoff_s,
            )
        except EndpointError as exc:
            return GenerationFailure(doc_id=chunk.doc_id, chunk_index=chunk.chunk_index, error=str(exc))

    triplets: list[CqaTriplet] = []
    failures: list[GenerationFailure] = []
    for result in map_bounded(one, chunks, max_workers=max_workers):
        if isinstance(result, GenerationFailure):
            failures.append(result)
        else:
            triplets.extend(result)
    triplets.sort(key=lambda t: t.sample_id)
    ids = [t.sample_id for t in triplets]
    if len(set(ids)) != len(ids):
        raise DatasetError("duplicate sample_ids in generated dataset")
    return triplets, failures


def make_unanswerable(
    dataset: Sequence[CqaTriplet],
    fraction: float,
    seed: int,
    template: str = UNANSWERABLE_TEMPLATE,
) -> list[CqaTriplet]:
    """Replace floor(fraction * N) triplets with cross-context unanswerable ones.

    A selected triplet keeps its context but takes its question from a triplet
    of a different chunk; the answer becomes the unanswerable template.
    Selection and pairing are seed-deterministic.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"unanswerable fraction must be in [0, 1], got {fraction}")
    if not dataset:
        raise ConfigError("cannot inject unanswerable questions into an empty dataset")
    n_flip = math.floor(fraction * len(dataset))
    result = [replace(t) for t in dataset]
    if n_flip == 0:
        return result
    origins = {(t.doc_id, t.chunk_index) for t in dataset}
    if len(origins) < 2:
        raise ConfigError("unanswerable injection needs triplets from at least two chunks")

    rng = random.Random(seed)
    victims = sorted(rng.sample(range(len(result)), n_flip))
    for index in victims:
        victim = result[index]
        while True:
            donor = dataset[rng.randrange(len(dataset))]
            if (donor.doc_id, donor.chunk_index) != (victim.doc_id, victim.chunk_index):
                break
        result[index] = replace(
            victim,
            question=donor.question,
            answer=template,
            answerable=False,
            question_origin=chunk_key(donor.doc_id, donor.chunk_index),
        )
    return result


def split_dataset(dataset: Sequence[CqaTriplet], spec: SplitSpec) -> tuple[list[CqaTriplet], list[CqaTriplet]]:
    """Seed-deterministic disjoint train/test split with |test| == test_size."""
    n = len(dataset)
    if not 0 <= spec.test_size <= n:
        raise ConfigError(f"test_size {spec.test_size} invalid for dataset of {n} samples")
    indices = list(range(n))
    random.Random(spec.seed).shuffle(indices)
    test_indices = set(indices[: spec.test_size])
    train, test = [], []
    for i, triplet in enumerate(dataset):
        if i in test_indices:
            test.append(replace(triplet, split="test"))
        else:
            train.append(replace(triplet, split="train"))
    return train, test


def write_triplets(path: str | Path, triplets: Iterable[CqaTriplet]) -> int:
    return write_jsonl(path, (t.to_record() for t in triplets))


def read_triplets(path: str | Path) -> list[CqaTriplet]:
    triplets = []
    seen: set[str] = set()
    for i, record in iter_jsonl(path):
        triplet = CqaTriplet.from_record(record)
        if triplet.sample_id in seen:
            raise DatasetError(f"{path}: duplicate sample_id {triplet.sample_id!r} at line {i}")
        seen.add(triplet.sample_id)
        triplets.append(triplet)
    return triplets
