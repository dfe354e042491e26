"""Chat-completion endpoints: an OpenAI-compatible HTTP client and an
in-process deterministic mock.

The mock implements the same call surface and derives every reply from a
stable hash of (seed, messages), so full pipelines can run hermetically and
reproduce byte-identical artifacts. Its three modes cover the pipeline's
roles: "generate" emits QUESTION:/ANSWER: blocks grounded in the prompt's
context, "answer" extracts an answer sentence from the context, and "judge"
reasons briefly and ends with a lone integer score.
"""

from __future__ import annotations

import hashlib
import logging
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol, Sequence, TypeVar

import httpx

from .errors import ConfigError, EndpointError

log = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 3
DEFAULT_BACKOFF_S = 0.5
DEFAULT_MAX_WORKERS = 8

Message = dict[str, str]


class ChatEndpoint(Protocol):
    def complete(
        self,
        messages: Sequence[Message],
        *,
        temperature: float,
        max_tokens: int | None = None,
        top_p: float | None = None,
    ) -> str: ...


def build_request_body(
    model: str,
    messages: Sequence[Message],
    temperature: float,
    max_tokens: int | None = None,
    top_p: float | None = None,
) -> dict[str, Any]:
    """Deterministic chat-completion request body (stable key order)."""
    body: dict[str, Any] = {
        "model": model,
        "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
        "temperature": temperature,
    }
    if top_p is not None:
        body["top_p"] = top_p
    if max_tokens is not None:
        body["max_tokens"] = max_tokens
    return body


class HttpChatEndpoint:
    """OpenAI-compatible chat completions over HTTP with bounded retries."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "CQAFORGE_API_KEY",
        timeout: float = 60.0,
        max_retries: int = DEFAULT_MAX_RETRIES,
        backoff_s: float = DEFAULT_BACKOFF_S,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def complete(
        self,
        messages: Sequence[Message],
        *,
        temperature: float,
        max_tokens: int | None = None,
        top_p: float | None = None,
    ) -> str:
        body = build_request_body(self.model, messages, temperature, max_tokens, top_p)
        url = f"{self.base_url}/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                response = self._client.post(url, json=body)
                response.raise_for_status()
                payload = response.json()
                return payload["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                log.warning("chat completion attempt %d/%d failed: %r", attempt + 1, self.max_retries, exc)
        raise EndpointError(f"{url}: request failed after {self.max_retries} attempts: {last_error!r}")


def _stable_rng(seed: int, *parts: str) -> random.Random:
    digest = hashlib.sha256()
    digest.update(str(seed).encode("utf-8"))
    for part in parts:
        digest.update(b"\x00")
        digest.update(part.encode("utf-8"))
    return random.Random(int.from_bytes(digest.digest()[:8], "big"))


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")
_WORDS = re.compile(r"[^\W\d_]{4,}", re.UNICODE)

_QUESTION_FORMS = (
    "What does the context state about {w}?",
    "Which details does the document give about {w}?",
    "According to the context, what is reported about {w}?",
    "Summarize what the context says about {w}.",
    "What figure or fact is associated with {w} in the context?",
    "How does the document describe {w}?",
    "What is mentioned in connection with {w}?",
    "Why is {w} relevant in this context?",
)

UNANSWERABLE_PHRASE = "This question cannot be answered from the provided context."


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def _between(prompt: str, start_label: str, end_label: str | None = None) -> str:
    """Text of the `start_label:` block, up to `end_label:` or the prompt end."""
    pattern = rf"{re.escape(start_label)}:\n(.*)"
    if end_label is not None:
        pattern = rf"{re.escape(start_label)}:\n(.*?)\n\n{re.escape(end_label)}"
    match = re.search(pattern, prompt, re.DOTALL)
    return match.group(1).strip() if match else ""


def _overlap(a: str, b: str) -> float:
    wa = {w.lower() for w in _WORDS.findall(a)}
    wb = {w.lower() for w in _WORDS.findall(b)}
    if not wa or not wb:
        return 0.0
    return len(wa & wb) / len(wa | wb)


@dataclass
class MockChatEndpoint:
    """Deterministic stand-in for a chat-completion endpoint.

    mode "generate" expects the synthesis prompt (with a Context: block and a
    pair count), "answer" the rendered inference prompt, "judge" the judge
    prompt with Reference answer:/Candidate answer: blocks.
    """

    mode: str
    seed: int = 0
    calls: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.mode not in ("generate", "answer", "judge"):
            raise ConfigError(f"unknown mock mode {self.mode!r}")

    def complete(
        self,
        messages: Sequence[Message],
        *,
        temperature: float,
        max_tokens: int | None = None,
        top_p: float | None = None,
    ) -> str:
        self.calls += 1
        prompt = "\n".join(m["content"] for m in messages)
        if self.mode == "generate":
            return self._generate(prompt)
        if self.mode == "answer":
            return self._answer(prompt)
        return self._judge(prompt)

    def _generate(self, prompt: str) -> str:
        context = _between(prompt, "Context")
        count_match = re.search(r"(\d+) question-answer pairs", prompt)
        n = int(count_match.group(1)) if count_match else 1
        sentences = _sentences(context) or [context.strip() or "No content."]
        rng = _stable_rng(self.seed, "generate", context)
        blocks = []
        for j in range(n):
            sentence = sentences[rng.randrange(len(sentences))]
            words = _WORDS.findall(sentence) or ["this"]
            keyword = max(words, key=len)
            question = _QUESTION_FORMS[j % len(_QUESTION_FORMS)].format(w=keyword)
            blocks.append(f"QUESTION: {question}\nANSWER: {sentence}")
        return "\n\n".join(blocks)

    def _answer(self, prompt: str) -> str:
        context = _between(prompt, "Context", "Question")
        question_match = re.search(r"Question:\n([^\n]*)", prompt)
        question = question_match.group(1).strip() if question_match else ""
        sentences = _sentences(context)
        if not sentences:
            return UNANSWERABLE_PHRASE
        best = max(sentences, key=lambda s: (_overlap(question, s), -len(s)))
        if _overlap(question, best) == 0.0:
            return UNANSWERABLE_PHRASE
        return best

    def _judge(self, prompt: str) -> str:
        reference = _between(prompt, "Reference answer", "Candidate answer")
        candidate = _between(prompt, "Candidate answer", "Work step by step")
        bounds = re.search(r"integer between (\d+) and (\d+)", prompt)
        low, high = (int(bounds.group(1)), int(bounds.group(2))) if bounds else (0, 10)
        score = low + round(_overlap(reference, candidate) * (high - low))
        reasoning = (
            "Comparing the candidate against the reference: shared key terms "
            f"cover {'most' if score >= (low + high) // 2 else 'little'} of the reference content."
        )
        return f"{reasoning}\n{score}"


T = TypeVar("T")
U = TypeVar("U")


def map_bounded(
    fn: Callable[[T], U],
    items: Iterable[T],
    max_workers: int = DEFAULT_MAX_WORKERS,
) -> list[U]:
    """Apply `fn` over items with bounded parallelism, preserving input order."""
    items = list(items)
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def call_with_retries(
    fn: Callable[[], str],
    retries: int = DEFAULT_MAX_RETRIES,
    backoff_s: float = DEFAULT_BACKOFF_S,
) -> str:
    """Run an endpoint call with exponential backoff; raises EndpointError at the end."""
    last_error: Exception | None = None
    for attempt in range(retries):
        if attempt:
            time.sleep(backoff_s * 2 ** (attempt - 1))
        try:
            return fn()
        except EndpointError:
            raise
        except Exception as exc:
            last_error = exc
            log.warning("endpoint call attempt %d/%d failed: %r", attempt + 1, retries, exc)
    raise EndpointError(f"endpoint call failed after {retries} attempts: {last_error!r}")
