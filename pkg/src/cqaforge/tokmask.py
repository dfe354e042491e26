"""Tokenization with instruction-label masking, dataset IO, and reference loss.

Labels are the input ids shifted left by one; every position whose next token
belongs to the instruction carries the IGNORE sentinel (-100), so the loss is
computed only on positions that predict response tokens. The final position
always carries IGNORE (no next token exists after the shift).

The instruction/response boundary must tokenize consistently:
encode(instruction) ++ encode(response) == encode(instruction + response).
A violation is a hard error naming the sample; silent re-segmentation would
corrupt the mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .chatform import RenderedSample
from .errors import DatasetError, TokenizationError
from .records import iter_jsonl, read_json, write_json, write_jsonl
from .tokenizers import TokenizerAdapter

IGNORE_INDEX = -100
DEFAULT_MAX_TOKENS = 4096


@dataclass
class TokenizedSample:
    sample_id: str
    input_ids: list[int]
    labels: list[int]
    instruction_len: int

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "input_ids": self.input_ids,
            "labels": self.labels,
            "instruction_len": self.instruction_len,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "TokenizedSample":
        return cls(
            sample_id=record["sample_id"],
            input_ids=list(record["input_ids"]),
            labels=list(record["labels"]),
            instruction_len=record["instruction_len"],
        )


def tokenize_and_mask(
    sample: RenderedSample,
    tok: TokenizerAdapter,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> TokenizedSample:
    """Tokenize a rendered sample and mask instruction positions with IGNORE.

    Position i's label is input_ids[i+1] when that next token is part of the
    response, IGNORE otherwise; so the unmasked positions are exactly
    [instruction_len - 1, n - 1).
    """
    instruction_ids = tok.encode(sample.instruction_text)
    response_ids = tok.encode(sample.response_text)
    full_ids = tok.encode(sample.full_text)
    if instruction_ids + response_ids != full_ids:
        raise TokenizationError(
            f"sample {sample.sample_id!r}: instruction/response do not tokenize "
            "consistently with their concatenation; fix the template instead of re-segmenting"
        )
    if not response_ids:
        raise TokenizationError(f"sample {sample.sample_id!r}: no trainable positions (empty response)")
    n = len(full_ids)
    if n > max_tokens:
        raise TokenizationError(f"sample {sample.sample_id!r}: {n} tokens exceeds the {max_tokens}-token maximum")

    instruction_len = len(instruction_ids)
    labels = [IGNORE_INDEX] * n
    for i in range(instruction_len - 1, n - 1):
        labels[i] = full_ids[i + 1]
    return TokenizedSample(
        sample_id=sample.sample_id,
        input_ids=full_ids,
        labels=labels,
        instruction_len=instruction_len,
    )


def _validate(sample: TokenizedSample) -> None:
    n = len(sample.input_ids)
    if len(sample.labels) != n:
        raise DatasetError(f"sample {sample.sample_id!r}: labels/input_ids length mismatch")
    if not 1 <= sample.instruction_len <= n:
        raise DatasetError(f"sample {sample.sample_id!r}: instruction_len {sample.instruction_len} out of range")
    if n and sample.labels[-1] != IGNORE_INDEX:
        raise DatasetError(f"sample {sample.sample_id!r}: final label must be IGNORE")
    expected_unmasked = list(range(sample.instruction_len - 1, n - 1))
    if unmasked_positions(sample.labels) != expected_unmasked:
        raise DatasetError(
            f"sample {sample.sample_id!r}: unmasked positions must be exactly "
            f"[{sample.instruction_len - 1}, {n - 1})"
        )
    if not expected_unmasked:
        raise DatasetError(f"sample {sample.sample_id!r}: no trainable positions")
    for i in expected_unmasked:
        if sample.labels[i] != sample.input_ids[i + 1]:
            raise DatasetError(f"sample {sample.sample_id!r}: label at {i} is not the shifted input id")


def write_dataset(samples: Sequence[TokenizedSample], path: str | Path) -> dict[str, Any]:
    """Write tokenized samples as JSONL plus a sidecar manifest with counts."""
    for sample in samples:
        _validate(sample)
    write_jsonl(path, (s.to_record() for s in samples))
    manifest = {
        "sample_count": len(samples),
        "token_count": sum(len(s.input_ids) for s in samples),
        "ignore_index": IGNORE_INDEX,
    }
    write_json(manifest_path(path), manifest)
    return manifest


def manifest_path(dataset_path: str | Path) -> Path:
    return Path(str(dataset_path) + ".manifest.json")


def read_dataset(path: str | Path) -> list[TokenizedSample]:
    samples = []
    for i, record in iter_jsonl(path):
        try:
            sample = TokenizedSample.from_record(record)
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}: corrupt record at line {i}: {exc}") from exc
        _validate(sample)
        samples.append(sample)
    manifest_file = manifest_path(path)
    if manifest_file.exists():
        manifest = read_json(manifest_file)
        if manifest.get("sample_count") != len(samples):
            raise DatasetError(f"{path}: manifest sample_count disagrees with file contents")
    return samples


def masked_positions(labels: Sequence[int]) -> list[int]:
    return [i for i, label in enumerate(labels) if label == IGNORE_INDEX]


def unmasked_positions(labels: Sequence[int]) -> list[int]:
    return [i for i, label in enumerate(labels) if label != IGNORE_INDEX]


def masked_cross_entropy_terms(logits: np.ndarray, labels: Sequence[int]) -> list[tuple[int, float]]:
    """Per-position (index, -log softmax[label]) for the non-IGNORE positions.

    Rows at IGNORE positions are never read, so arbitrary changes there cannot
    move the result by even one bit.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise DatasetError(f"logits must be a 2-d matrix, got shape {logits.shape}")
    n, vocab = logits.shape
    if len(labels) != n:
        raise DatasetError(f"got {len(labels)} labels for {n} logit rows")
    terms: list[tuple[int, float]] = []
    for i in unmasked_positions(labels):
        label = labels[i]
        if not 0 <= label < vocab:
            raise DatasetError(f"label {label} at position {i} outside vocabulary of size {vocab}")
        row = logits[i]
        peak = float(np.max(row))
        logsumexp = peak + float(np.log(np.sum(np.exp(row - peak))))
        terms.append((i, logsumexp - float(row[label])))
    return terms


def masked_cross_entropy(logits: np.ndarray, labels: Sequence[int]) -> float:
    """Mean negative log-likelihood over the non-IGNORE positions."""
    terms = masked_cross_entropy_terms(logits, labels)
    if not terms:
        raise DatasetError("no trainable positions: every label is IGNORE")
    return sum(value for _, value in terms) / len(terms)
