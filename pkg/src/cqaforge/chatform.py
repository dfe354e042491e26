"""Prompt rendering for training, inference, and judging.

A ChatTemplate carries the marker strings of one model family (Llama 3.1 by
default) plus the user-turn body. Rendering is pure: the same triplet and
template always produce identical strings, and the instruction/response
boundary falls exactly at the end of the assistant header block so the
tokenizer can mask instruction labels without re-segmenting.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import TemplateError

TEMPLATE_NAMES = ("llama31", "mistral", "plain")


def _placeholders(template: str) -> list[str]:
    try:
        return [name for _, name, _, _ in string.Formatter().parse(template) if name]
    except ValueError as exc:
        raise TemplateError(f"unparseable template: {exc}") from exc


def _require_once(template: str, names: tuple[str, ...], where: str) -> None:
    found = _placeholders(template)
    for name in names:
        count = found.count(name)
        if count != 1:
            raise TemplateError(f"{where}: placeholder {{{name}}} must appear exactly once, found {count}")
    unexpected = [n for n in found if n not in names]
    if unexpected:
        raise TemplateError(f"{where}: unexpected placeholders {unexpected}")


@dataclass(frozen=True)
class ChatTemplate:
    """Marker strings and body templates for one model family."""

    name: str
    system_text: str
    begin_of_text: str
    header_open: str
    header_close: str
    end_of_turn: str
    assistant_prefix: str
    user_body_template: str
    judge_body_template: str = field(repr=False, default="")

    def __post_init__(self):
        for marker_field in ("header_open", "header_close", "end_of_turn"):
            if not getattr(self, marker_field):
                raise TemplateError(f"template {self.name!r}: marker {marker_field!r} must be non-empty")
        _require_once(self.user_body_template, ("context", "question"), f"template {self.name!r} user body")
        if self.judge_body_template:
            _require_once(
                self.judge_body_template,
                ("question", "reference", "candidate", "score_min", "score_max"),
                f"template {self.name!r} judge body",
            )

    @property
    def markers(self) -> list[str]:
        """Marker strings that tokenizers should treat as single tokens."""
        seen = [self.begin_of_text, self.header_open, self.header_close, self.end_of_turn]
        return [m for m in dict.fromkeys(seen) if m]

    def _turn_header(self, role: str) -> str:
        return f"{self.header_open}{role}{self.header_close}"

    def instruction_for(self, context: str, question: str) -> str:
        body = self.user_body_template.format(context=context, question=question)
        parts = [self.begin_of_text]
        if self.system_text:
            parts += [self._turn_header("system"), self.system_text, self.end_of_turn]
        parts += [self._turn_header("user"), body, self.end_of_turn]
        parts += [self._turn_header("assistant"), self.assistant_prefix]
        return "".join(parts)


@dataclass(frozen=True)
class RenderedSample:
    sample_id: str
    instruction_text: str
    response_text: str

    @property
    def full_text(self) -> str:
        return self.instruction_text + self.response_text

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "instruction_text": self.instruction_text,
            "response_text": self.response_text,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "RenderedSample":
        return cls(
            sample_id=record["sample_id"],
            instruction_text=record["instruction_text"],
            response_text=record["response_text"],
        )


def load_template(spec: str | Path) -> ChatTemplate:
    """Load a template by shipped name ("llama31", "mistral", "plain") or file path."""
    if isinstance(spec, str) and spec in TEMPLATE_NAMES:
        payload = json.loads(
            resources.files("cqaforge.templates").joinpath(f"{spec}.json").read_text(encoding="utf-8")
        )
    else:
        path = Path(spec)
        if not path.is_file():
            raise TemplateError(f"template {spec!r} is neither a shipped name {TEMPLATE_NAMES} nor a file")
        payload = json.loads(path.read_text(encoding="utf-8"))
    if not payload.get("judge_body_template"):
        payload["judge_body_template"] = (
            resources.files("cqaforge.templates").joinpath("judge_body.txt").read_text(encoding="utf-8")
        )
    try:
        return ChatTemplate(**payload)
    except TypeError as exc:
        raise TemplateError(f"template {spec!r}: {exc}") from exc


def render_training_sample(triplet, template: ChatTemplate) -> RenderedSample:
    """Render one triplet into the instruction-tuning chat format.

    instruction_text runs through the assistant header (and prefix);
    response_text starts at the answer's first character and carries the
    trailing end-of-turn marker so the model learns to terminate.
    """
    return RenderedSample(
        sample_id=triplet.sample_id,
        instruction_text=template.instruction_for(triplet.context, triplet.question),
        response_text=f"{triplet.answer}{template.end_of_turn}",
    )


def render_inference_prompt(context: str, question: str, template: ChatTemplate) -> str:
    """The generation prompt: identical to the training instruction, no answer."""
    return template.instruction_for(context, question)


def render_judge_prompt(
    question: str,
    reference_answer: str,
    candidate_answer: str,
    template: ChatTemplate,
    score_min: int = 0,
    score_max: int = 10,
) -> str:
    """Reference-guided judge prompt: stepwise reasoning, then a lone integer score."""
    return template.judge_body_template.format(
        question=question,
        reference=reference_answer,
        candidate=candidate_answer,
        score_min=score_min,
        score_max=score_max,
    )
