"""Tokenizer adapters.

Two hermetic tokenizers ship with the toolkit:

- ``byte``: UTF-8 bytes are token ids 0..255; template marker strings map to
  dedicated ids above 255. Round-trips any text exactly and concatenation of
  encodings equals encoding of the concatenation (no merges across a cut),
  which is what the instruction/response boundary check relies on. Default
  for tokenization + masking; its small dense vocabulary also suits toy
  training drivers downstream.
- ``word``: maximal ``\\S+`` runs with trailing whitespace attached (a leading
  whitespace run forms its own token). Realistic token counts for chunking,
  exact round-trip, and character-aligned offsets. Ids are assigned first-seen,
  so decoding is only meaningful within the process that encoded.

Both satisfy the adapter contract: deterministic ``encode``, exact
``decode(encode(t)) == t``, a vocabulary size, and marker-token ids.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence

from .errors import ConfigError


@dataclass(frozen=True)
class TokenSpan:
    """One token with its [start, end) character span in the source text."""

    token_id: int
    start: int
    end: int


class TokenizerAdapter(Protocol):
    name: str

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: Sequence[int]) -> str: ...

    def encode_with_offsets(self, text: str) -> list[TokenSpan]: ...

    def safe_cut(self, spans: list[TokenSpan], index: int) -> int:
        """Largest index <= `index` at which the token list may be cut."""
        ...

    @property
    def vocab_size(self) -> int: ...

    @property
    def marker_token_ids(self) -> dict[str, int]: ...


class ByteTokenizer:
    """UTF-8 byte-level tokenizer with single-id marker tokens."""

    name = "byte"

    def __init__(self, special_tokens: Sequence[str] = ()):
        specials = [s for s in dict.fromkeys(special_tokens) if s]
        self._specials = sorted(specials, key=len, reverse=True)
        self._special_ids = {s: 256 + i for i, s in enumerate(specials)}
        self._ids_to_special = {i: s for s, i in self._special_ids.items()}

    @property
    def vocab_size(self) -> int:
        return 256 + len(self._special_ids)

    @property
    def marker_token_ids(self) -> dict[str, int]:
        return dict(self._special_ids)

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        pos = 0
        while pos < len(text):
            for special in self._specials:
                if text.startswith(special, pos):
                    ids.append(self._special_ids[special])
                    pos += len(special)
                    break
            else:
                ids.extend(text[pos].encode("utf-8"))
                pos += 1
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        parts: list[str] = []
        buf = bytearray()
        for i in ids:
            if i < 256:
                buf.append(i)
            else:
                if buf:
                    parts.append(buf.decode("utf-8"))
                    buf = bytearray()
                parts.append(self._ids_to_special[i])
        if buf:
            parts.append(buf.decode("utf-8"))
        return "".join(parts)

    def encode_with_offsets(self, text: str) -> list[TokenSpan]:
        spans: list[TokenSpan] = []
        pos = 0
        while pos < len(text):
            for special in self._specials:
                if text.startswith(special, pos):
                    spans.append(TokenSpan(self._special_ids[special], pos, pos + len(special)))
                    pos += len(special)
                    break
            else:
                # one span per byte of the char; all share the char's offsets
                for b in text[pos].encode("utf-8"):
                    spans.append(TokenSpan(b, pos, pos + 1))
                pos += 1
        return spans

    def safe_cut(self, spans: list[TokenSpan], index: int) -> int:
        # retreat so a multi-byte character is never split
        while 0 < index < len(spans) and spans[index].start < spans[index - 1].end:
            index -= 1
        return index


_WORD_RUN = re.compile(r"\S+\s*|\s+")


class WordTokenizer:
    """Whitespace-run tokenizer: each token is a word plus trailing whitespace."""

    name = "word"

    def __init__(self):
        self._vocab: dict[str, int] = {}
        self._tokens: list[str] = []

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    @property
    def marker_token_ids(self) -> dict[str, int]:
        return {}

    def _id_for(self, token: str) -> int:
        token_id = self._vocab.get(token)
        if token_id is None:
            token_id = len(self._tokens)
            self._vocab[token] = token_id
            self._tokens.append(token)
        return token_id

    def encode(self, text: str) -> list[int]:
        return [self._id_for(m.group(0)) for m in _WORD_RUN.finditer(text)]

    def decode(self, ids: Sequence[int]) -> str:
        return "".join(self._tokens[i] for i in ids)

    def encode_with_offsets(self, text: str) -> list[TokenSpan]:
        return [
            TokenSpan(self._id_for(m.group(0)), m.start(), m.end())
            for m in _WORD_RUN.finditer(text)
        ]

    def safe_cut(self, spans: list[TokenSpan], index: int) -> int:
        return index


TOKENIZER_NAMES = ("byte", "word")


def build_tokenizer(spec: str, special_tokens: Sequence[str] = ()) -> TokenizerAdapter:
    """Build a tokenizer from its registry name."""
    if spec == "byte":
        return ByteTokenizer(special_tokens=special_tokens)
    if spec == "word":
        return WordTokenizer()
    raise ConfigError(f"unknown tokenizer {spec!r}; expected one of {TOKENIZER_NAMES}")
