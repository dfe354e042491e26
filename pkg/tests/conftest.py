"""Shared fixtures: a small deterministic corpus and scripted endpoints."""

from __future__ import annotations

from pathlib import Path

import pytest

from cqaforge.corpus import Chunk, Document
from cqaforge.synthgen import CqaTriplet


def pytest_runtest_logreport(report):
    # one visible PASS/FAIL line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE {status}] {name}")

COMPANIES = ["Aurora Capital", "Borealis Energy", "Cedar Holdings", "Delta Freight", "Ensign Bank"]
TOPICS = [
    "reported revenue of {amount} million euros for the fiscal year",
    "proposed a dividend of {amount} cents per share",
    "expanded headcount by {amount} employees across its regional offices",
    "reduced carbon emissions by {amount} percent against the 2020 baseline",
    "completed the annual audit with {amount} remarks from the external auditor",
    "held liquid assets covering {amount} months of operating expenses",
]


def fixture_document_text(doc_index: int, paragraphs: int = 6, sentences: int = 7) -> str:
    company = COMPANIES[doc_index % len(COMPANIES)]
    blocks = []
    for p in range(paragraphs):
        parts = []
        for s in range(sentences):
            template = TOPICS[(doc_index + p + s) % len(TOPICS)]
            amount = 10 + (doc_index * 31 + p * 7 + s * 3) % 90
            parts.append(f"{company} {template.format(amount=amount)}.")
        blocks.append(" ".join(parts))
    return "\n\n".join(blocks)


def write_fixture_corpus(root: Path, n_docs: int = 5, with_sidecar: bool = True) -> Path | None:
    """Write n_docs markdown files under root; returns the sidecar path."""
    root.mkdir(parents=True, exist_ok=True)
    rows = ["filename,company,category,language"]
    for i in range(n_docs):
        name = f"report_{i}.md"
        (root / name).write_text(fixture_document_text(i), encoding="utf-8")
        rows.append(f"{name},{COMPANIES[i % len(COMPANIES)]},financial/audit,en")
    if not with_sidecar:
        return None
    sidecar = root.parent / "metadata.csv"
    sidecar.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return sidecar


@pytest.fixture
def corpus_dir(tmp_path: Path) -> Path:
    root = tmp_path / "corpus"
    write_fixture_corpus(root)
    return root


@pytest.fixture
def corpus_with_sidecar(tmp_path: Path) -> tuple[Path, Path]:
    root = tmp_path / "corpus"
    sidecar = write_fixture_corpus(root)
    return root, sidecar


def make_triplet(i: int = 0, chunk: int = 0, doc: str = "doc", **overrides) -> CqaTriplet:
    fields = dict(
        sample_id=f"{doc}/c{chunk:04d}/q{i:02d}",
        context=f"Context text {doc} {chunk} about revenue and audits.",
        question=f"What is fact {i} of chunk {chunk}?",
        answer=f"Fact {i} of chunk {chunk}.",
        answerable=True,
        language="en",
        company="Aurora Capital",
        category="financial/audit",
        doc_id=doc,
        chunk_index=chunk,
        question_origin=f"{doc}/c{chunk:04d}",
    )
    fields.update(overrides)
    return CqaTriplet(**fields)


def make_chunk(doc_id: str = "doc", index: int = 0, text: str | None = None) -> Chunk:
    text = text if text is not None else fixture_document_text(index, paragraphs=1)
    return Chunk(doc_id=doc_id, chunk_index=index, text=text, token_count=len(text.split()), char_span=(0, len(text)))


def make_document(doc_id: str = "doc", text: str | None = None, **overrides) -> Document:
    fields = dict(
        doc_id=doc_id,
        company="Aurora Capital",
        category="financial/audit",
        language="en",
        text=text if text is not None else fixture_document_text(0),
        source_path=f"{doc_id}.md",
    )
    fields.update(overrides)
    return Document(**fields)


class ScriptedEndpoint:
    """Endpoint stub that replays scripted payloads and records every call."""

    def __init__(self, payloads: list[str], fail_first: int = 0):
        self.payloads = payloads
        self.fail_first = fail_first
        self.calls: list[dict] = []

    def complete(self, messages, *, temperature, max_tokens=None, top_p=None):
        self.calls.append(
            {"messages": list(messages), "temperature": temperature, "max_tokens": max_tokens, "top_p": top_p}
        )
        if self.fail_first > 0:
            self.fail_first -= 1
            raise ConnectionError("scripted transient failure")
        return self.payloads[(len(self.calls) - 1) % len(self.payloads)]
