"""Document ingestion and token-window chunking.

Supported inputs are pre-extracted plain-text / markdown files. Metadata
(company, category, language) is resolved from an optional CSV sidecar keyed
by filename; anything missing falls back to defaults, with language filled by
a small stopword heuristic.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import ConfigError, DatasetError
from .records import iter_jsonl, write_jsonl
from .tokenizers import TokenizerAdapter, TokenSpan

log = logging.getLogger(__name__)

CATEGORIES = (
    "financial/audit",
    "governance/compliance",
    "legal",
    "corporate report",
    "marketing/communication",
    "technical/research",
)
DEFAULT_CATEGORY = "corporate report"
SUPPORTED_SUFFIXES = (".txt", ".md", ".markdown")

DEFAULT_WINDOW = 1024
DEFAULT_OVERLAP = 64
DEFAULT_SNAP_TOKENS = 32


@dataclass
class Document:
    doc_id: str
    company: str
    category: str
    language: str
    text: str
    source_path: str

    def to_record(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "Document":
        return cls(**{f: record[f] for f in ("doc_id", "company", "category", "language", "text", "source_path")})


@dataclass
class Chunk:
    doc_id: str
    chunk_index: int
    text: str
    token_count: int
    char_span: tuple[int, int]

    def to_record(self) -> dict[str, Any]:
        record = asdict(self)
        record["char_span"] = list(self.char_span)
        return record

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "Chunk":
        return cls(
            doc_id=record["doc_id"],
            chunk_index=record["chunk_index"],
            text=record["text"],
            token_count=record["token_count"],
            char_span=(record["char_span"][0], record["char_span"][1]),
        )


@dataclass
class IngestError:
    source_path: str
    error: str


# Minimal stopword sets for the trivial language heuristic. Ties and misses
# fall back to "und" (BCP-47 undetermined).
_STOPWORDS = {
    "en": {"the", "and", "of", "to", "in", "is", "for", "that", "with", "as"},
    "de": {"der", "die", "das", "und", "ist", "nicht", "für", "mit", "ein", "wir"},
    "fr": {"le", "la", "les", "des", "est", "une", "pour", "dans", "que", "nous"},
    "es": {"el", "los", "las", "es", "una", "para", "con", "por", "del", "nosotros"},
    "it": {"il", "gli", "della", "per", "una", "sono", "con", "che", "nel", "questo"},
    "sv": {"och", "att", "det", "som", "en", "är", "för", "på", "med", "av"},
    "no": {"og", "det", "som", "en", "er", "for", "på", "med", "av", "ikke"},
}


def detect_language(text: str, sample_chars: int = 4000) -> str:
    """Pick the language whose stopwords occur most often; "und" when unclear."""
    words = re.findall(r"[^\W\d_]+", text[:sample_chars].lower())
    if not words:
        return "und"
    scores = {lang: sum(1 for w in words if w in stop) for lang, stop in _STOPWORDS.items()}
    best = max(scores, key=lambda lang: (scores[lang], lang))
    runner_up = max((s for lang, s in scores.items() if lang != best), default=0)
    if scores[best] == 0 or scores[best] == runner_up:
        return "und"
    return best


def _doc_id_for(rel_path: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9_.-]+", "-", rel_path.rsplit(".", 1)[0]).strip("-")
    digest = hashlib.sha1(rel_path.encode("utf-8")).hexdigest()[:6]
    return f"{slug}-{digest}"


def load_sidecar(path: str | Path) -> dict[str, dict[str, str]]:
    """Read a metadata CSV keyed by filename with company/category/language columns."""
    rows: dict[str, dict[str, str]] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "filename" not in reader.fieldnames:
            raise ConfigError(f"{path}: sidecar needs a 'filename' column")
        for row in reader:
            key = (row.get("filename") or "").strip()
            if key:
                rows[key] = {k: (v or "").strip() for k, v in row.items()}
    return rows


def _category_key(value: str) -> str:
    return re.sub(r"[^a-z]+", " ", value.lower()).strip()


_CATEGORY_LOOKUP = {_category_key(c): c for c in CATEGORIES}


def _normalize_category(raw: str, source: str) -> str:
    canonical = _CATEGORY_LOOKUP.get(_category_key(raw))
    if canonical:
        return canonical
    if raw.strip():
        log.warning("%s: unknown category %r, using %r", source, raw, DEFAULT_CATEGORY)
    else:
        log.warning("%s: missing category, using %r", source, DEFAULT_CATEGORY)
    return DEFAULT_CATEGORY


def ingest_documents(
    root: str | Path,
    sidecar: str | Path | None = None,
    language_detector: Callable[[str], str] = detect_language,
) -> tuple[list[Document], list[IngestError]]:
    """Scan `root` for supported text files and build Document records.

    Unreadable files become per-file error records and ingestion continues.
    An empty directory yields an empty manifest with a warning, not a failure.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"corpus root {root} is not a readable directory")
    meta = load_sidecar(sidecar) if sidecar else {}

    documents: list[Document] = []
    errors: list[IngestError] = []
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.suffix.lower() not in SUPPORTED_SUFFIXES:
            continue
        rel = path.relative_to(root).as_posix()
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            errors.append(IngestError(source_path=rel, error=str(exc)))
            continue
        if not text.strip():
            errors.append(IngestError(source_path=rel, error="empty document"))
            continue
        row = meta.get(rel) or meta.get(path.name) or {}
        language = row.get("language") or language_detector(text)
        documents.append(
            Document(
                doc_id=_doc_id_for(rel),
                company=row.get("company") or "unknown",
                category=_normalize_category(row.get("category", ""), rel),
                language=language,
                text=text,
                source_path=rel,
            )
        )
    if not documents:
        log.warning("no supported documents found under %s", root)
    return documents, errors


def write_manifest(path: str | Path, documents: Iterable[Document]) -> int:
    return write_jsonl(path, (d.to_record() for d in documents))


def read_manifest(path: str | Path) -> list[Document]:
    documents = []
    seen: set[str] = set()
    for i, record in iter_jsonl(path):
        doc = Document.from_record(record)
        if doc.doc_id in seen:
            raise DatasetError(f"{path}: duplicate doc_id {doc.doc_id!r} at line {i}")
        seen.add(doc.doc_id)
        documents.append(doc)
    return documents


def plan_windows(
    n_tokens: int,
    window: int,
    overlap: int,
    snap: Callable[[int, int], int] | None = None,
) -> list[tuple[int, int]]:
    """Token-index [start, end) windows covering [0, n_tokens).

    Consecutive windows share exactly `overlap` tokens. `snap(start, end)` may
    pull an interior window end backward (e.g. onto a sentence boundary); it
    must return an end in (start + overlap, end].
    """
    if window <= overlap or overlap < 0:
        raise ConfigError(f"window ({window}) must be greater than overlap ({overlap}) and overlap >= 0")
    if n_tokens == 0:
        return []
    spans: list[tuple[int, int]] = []
    start = 0
    while True:
        end = min(start + window, n_tokens)
        if end < n_tokens and snap is not None:
            snapped = snap(start, end)
            if start + overlap < snapped <= end:
                end = snapped
        spans.append((start, end))
        if end >= n_tokens:
            return spans
        start = end - overlap


_BOUNDARY_CHARS = (".", "!", "?", ":", ";")


def _is_boundary_token(text: str, span: TokenSpan) -> bool:
    token = text[span.start : span.end]
    stripped = token.rstrip()
    return "\n" in token or stripped.endswith(_BOUNDARY_CHARS)


def chunk_document(
    doc: Document,
    tokenizer: TokenizerAdapter,
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_OVERLAP,
    snap_tokens: int = DEFAULT_SNAP_TOKENS,
) -> list[Chunk]:
    """Segment a document into token-bounded chunks with configured overlap.

    Interior chunk ends are snapped backward (up to `snap_tokens`) onto the
    nearest sentence/newline boundary when one exists; the window and overlap
    invariants are preserved either way.
    """
    spans = tokenizer.encode_with_offsets(doc.text)

    def snap(start: int, end: int) -> int:
        end = tokenizer.safe_cut(spans, end)
        if snap_tokens <= 0:
            return end
        for j in range(end - 1, max(start + overlap, end - 1 - snap_tokens), -1):
            if _is_boundary_token(doc.text, spans[j - 1]):
                cut = tokenizer.safe_cut(spans, j)
                if cut > start + overlap:
                    return cut
                break
        return end

    chunks = []
    for index, (start, end) in enumerate(plan_windows(len(spans), window, overlap, snap=snap)):
        char_start = spans[start].start
        char_end = spans[end - 1].end
        chunks.append(
            Chunk(
                doc_id=doc.doc_id,
                chunk_index=index,
                text=doc.text[char_start:char_end],
                token_count=end - start,
                char_span=(char_start, char_end),
            )
        )
    return chunks


def write_chunks(path: str | Path, chunks: Iterable[Chunk]) -> int:
    return write_jsonl(path, (c.to_record() for c in chunks))


def read_chunks(path: str | Path) -> list[Chunk]:
    return [Chunk.from_record(record) for _, record in iter_jsonl(path)]


def corpus_stats(documents: list[Document]) -> dict[str, Any]:
    """Category/language distributions plus document and company totals."""
    total = len(documents)
    by_category: dict[str, int] = {}
    by_language: dict[str, int] = {}
    companies: set[str] = set()
    for doc in documents:
        by_category[doc.category] = by_category.get(doc.category, 0) + 1
        by_language[doc.language] = by_language.get(doc.language, 0) + 1
        companies.add(doc.company)

    def distribution(counts: dict[str, int]) -> dict[str, dict[str, float]]:
        return {
            key: {"count": count, "fraction": count / total if total else 0.0}
            for key, count in sorted(counts.items())
        }

    non_english = sum(count for lang, count in by_language.items() if lang != "en")
    return {
        "documents": total,
        "companies": len(companies),
        "by_category": distribution(by_category),
        "by_language": distribution(by_language),
        "multilingual_fraction": non_english / total if total else 0.0,
    }
