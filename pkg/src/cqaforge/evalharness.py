"""Benchmark evaluation: greedy answer generation, self-consistency judging,
and scorecard aggregation.

Scores are parsed from judge outputs as the last standalone in-range integer,
which tolerates chain-of-thought preambles while honoring the score-only
final-line contract. Failed generations and unparseable judgments are
excluded with explicit counts, never silently scored.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

from .chatform import ChatTemplate, render_inference_prompt, render_judge_prompt
from .endpoints import ChatEndpoint, map_bounded
from .errors import BenchmarkError, ConfigError, EndpointError
from .records import iter_jsonl, write_jsonl

log = logging.getLogger(__name__)

DEFAULT_JUDGMENTS = 3
DEFAULT_SCORE_MIN = 0
DEFAULT_SCORE_MAX = 10
BENCHMARK_SOURCES = ("withheld", "financebench", "finqabench", "custom")

# Column maps for non-native benchmark layouts; override via a field-map
# config file when a local copy uses different headers.
DEFAULT_FIELD_MAPS: dict[str, dict[str, str]] = {
    "withheld": {
        "question_id": "sample_id",
        "context": "context",
        "question": "question",
        "reference_answer": "answer",
    },
    "financebench": {
        "question_id": "financebench_id",
        "context": "evidence_text",
        "question": "question",
        "reference_answer": "answer",
    },
    "finqabench": {
        "question_id": "question_id",
        "context": "context",
        "question": "question",
        "reference_answer": "reference_answer",
    },
    "custom": {
        "question_id": "question_id",
        "context": "context",
        "question": "question",
        "reference_answer": "reference_answer",
    },
}


@dataclass
class BenchmarkItem:
    question_id: str
    context: str
    question: str
    reference_answer: str
    source: str

    def to_record(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class JudgeVerdict:
    question_id: str
    candidate_answer: str
    scores: list[int]
    mean_score: float | None
    raw_judge_outputs: list[str]
    valid: bool = True
    error: str = ""

    def to_record(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class Scorecard:
    benchmark: str
    n_questions: int
    percent_score: float
    histogram: dict[int, int]
    per_question: list[JudgeVerdict]
    excluded_failed_generation: int = 0
    excluded_invalid_judgment: int = 0

    def to_record(self) -> dict[str, Any]:
        record = asdict(self)
        record["histogram"] = {str(k): v for k, v in sorted(self.histogram.items())}
        return record


@dataclass
class EvalSettings:
    judgments: int = DEFAULT_JUDGMENTS
    score_min: int = DEFAULT_SCORE_MIN
    score_max: int = DEFAULT_SCORE_MAX
    max_new_tokens: int | None = 512
    max_workers: int = 8

    def __post_init__(self):
        if self.judgments < 1:
            raise ConfigError(f"judgments (k) must be >= 1, got {self.judgments}")
        if self.score_min >= self.score_max:
            raise ConfigError("score_min must be below score_max")


def load_field_maps(path: str | Path | None) -> dict[str, dict[str, str]]:
    maps = {name: dict(fields) for name, fields in DEFAULT_FIELD_MAPS.items()}
    if path is not None:
        import json

        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
        for name, fields in overrides.items():
            maps.setdefault(name, {}).update(fields)
    return maps


def load_benchmark(
    path: str | Path,
    adapter: str,
    field_maps: dict[str, dict[str, str]] | None = None,
) -> tuple[list[BenchmarkItem], list[dict[str, Any]]]:
    """Load benchmark rows into normalized items.

    Returns (items, malformed) where malformed carries the line index and the
    missing/empty field of every rejected row. Zero valid rows is an error.
    """
    maps = field_maps or DEFAULT_FIELD_MAPS
    if adapter not in maps:
        raise BenchmarkError(f"unknown benchmark adapter {adapter!r}; expected one of {sorted(maps)}")
    fields = maps[adapter]
    items: list[BenchmarkItem] = []
    malformed: list[dict[str, Any]] = []
    seen: set[str] = set()
    for i, record in iter_jsonl(path):
        values = {}
        problem = None
        for target, source_field in fields.items():
            value = record.get(source_field)
            if value is None or (isinstance(value, str) and not value.strip()):
                problem = f"missing or empty field {source_field!r}"
                break
            values[target] = str(value)
        if problem is None and values["question_id"] in seen:
            problem = f"duplicate question_id {values['question_id']!r}"
        if problem is not None:
            malformed.append({"line": i, "error": problem})
            continue
        seen.add(values["question_id"])
        items.append(BenchmarkItem(source=adapter, **values))
    if malformed:
        log.warning("%s: %d malformed rows skipped", path, len(malformed))
    if not items:
        raise BenchmarkError(f"{path}: no valid benchmark rows")
    return items, malformed


def generate_answer(
    item: BenchmarkItem,
    endpoint: ChatEndpoint,
    template: ChatTemplate,
    max_new_tokens: int | None = 512,
) -> str:
    """Greedy candidate answer: temperature 0, no nucleus truncation."""
    prompt = render_inference_prompt(item.context, item.question, template)
    return endpoint.complete(
        [{"role": "user", "content": prompt}],
        temperature=0.0,
        top_p=1.0,
        max_tokens=max_new_tokens,
    )


def parse_score(raw: str, score_min: int, score_max: int) -> int | None:
    """Last standalone integer within [score_min, score_max], else None."""
    best: int | None = None
    for match in re.finditer(r"(?<![\w.-])-?\d+(?![\w.])", raw):
        value = int(match.group(0))
        if score_min <= value <= score_max:
            best = value
    return best


def judge_answer(
    item: BenchmarkItem,
    candidate: str,
    judge_endpoint: ChatEndpoint,
    template: ChatTemplate,
    settings: EvalSettings = EvalSettings(),
) -> JudgeVerdict:
    """k independent judgments of one candidate answer, averaged.

    An unparseable judgment gets one bounded re-ask; if it still fails the
    verdict is flagged invalid and later excluded with a count.
    """
    prompt = render_judge_prompt(
        item.question,
        item.reference_answer,
        candidate,
        template,
        score_min=settings.score_min,
        score_max=settings.score_max,
    )
    scores: list[int] = []
    raw_outputs: list[str] = []
    for _ in range(settings.judgments):
        score: int | None = None
        for _attempt in range(2):  # one bounded re-ask
            raw = judge_endpoint.complete(
                [{"role": "user", "content": prompt}],
                temperature=0.0,
                top_p=1.0,
            )
            raw_outputs.append(raw)
            score = parse_score(raw, settings.score_min, settings.score_max)
            if score is not None:
                break
        if score is None:
            return JudgeVerdict(
                question_id=item.question_id,
                candidate_answer=candidate,
                scores=[],
                mean_score=None,
                raw_judge_outputs=raw_outputs,
                valid=False,
                error="unparseable judge output after re-ask",
            )
        scores.append(score)
    return JudgeVerdict(
        question_id=item.question_id,
        candidate_answer=candidate,
        scores=scores,
        mean_score=sum(scores) / len(scores),
        raw_judge_outputs=raw_outputs,
    )


def score_histogram(verdicts: Sequence[JudgeVerdict], score_min: int = DEFAULT_SCORE_MIN, score_max: int = DEFAULT_SCORE_MAX) -> dict[int, int]:
    """Counts of individual judge scores per integer bucket."""
    counts = {bucket: 0 for bucket in range(score_min, score_max + 1)}
    for verdict in verdicts:
        if not verdict.valid:
            continue
        for score in verdict.scores:
            counts[score] += 1
    return counts


def write_histogram_csv(path: str | Path, histogram: dict[int, int]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["score", "count"])
        for bucket in sorted(histogram):
            writer.writerow([bucket, histogram[bucket]])


def aggregate_scorecard(
    verdicts: Sequence[JudgeVerdict],
    benchmark: str,
    settings: EvalSettings = EvalSettings(),
    excluded_failed_generation: int = 0,
) -> Scorecard:
    """Percent score (10x the mean judge score) plus histogram and exclusions.

    Aggregation is exact rational arithmetic keyed by question_id, so any
    reordering of questions or completion order yields identical output.
    """
    valid = sorted((v for v in verdicts if v.valid), key=lambda v: v.question_id)
    invalid = [v for v in verdicts if not v.valid]
    if not valid:
        raise BenchmarkError("no valid verdicts to aggregate")
    total = Fraction(0)
    for verdict in valid:
        total += Fraction(sum(verdict.scores), len(verdict.scores))
    percent = float(10 * total / len(valid))
    return Scorecard(
        benchmark=benchmark,
        n_questions=len(valid),
        percent_score=percent,
        histogram=score_histogram(valid, settings.score_min, settings.score_max),
        per_question=valid,
        excluded_failed_generation=excluded_failed_generation,
        excluded_invalid_judgment=len(invalid),
    )


def run_benchmark(
    items: Sequence[BenchmarkItem],
    model_endpoint: ChatEndpoint,
    judge_endpoint: ChatEndpoint,
    template: ChatTemplate,
    benchmark: str,
    settings: EvalSettings = EvalSettings(),
    on_progress: Callable[[str], None] | None = None,
) -> Scorecard:
    """Full evaluation: generate every candidate greedily, judge k times, aggregate."""

    def evaluate(item: BenchmarkItem) -> JudgeVerdict | None:
        try:
            candidate = generate_answer(item, model_endpoint, template, settings.max_new_tokens)
        except EndpointError as exc:
            log.warning("%s: generation failed, excluding: %s", item.question_id, exc)
            return None
        verdict = judge_answer(item, candidate, judge_endpoint, template, settings)
        if on_progress:
            on_progress(item.question_id)
        return verdict

    results = map_bounded(evaluate, items, max_workers=settings.max_workers)
    failed = sum(1 for r in results if r is None)
    verdicts = [r for r in results if r is not None]
    return aggregate_scorecard(verdicts, benchmark, settings, excluded_failed_generation=failed)


def write_verdicts(path: str | Path, verdicts: Sequence[JudgeVerdict]) -> int:
    return write_jsonl(path, (v.to_record() for v in verdicts))
