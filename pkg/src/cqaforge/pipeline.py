"""End-to-end pipeline driver and config validation.

One YAML config file with per-module sections drives the stage sequence
ingest -> chunk -> generate -> unanswerable -> split -> render -> tokenize ->
(optional) eval. Seeds are mandatory: with the in-process mock endpoints the
whole run is deterministic and two runs with the same config produce
byte-identical artifacts (the summary carries no wall-clock state; timings go
to the log).
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from . import chatform, corpus, evalharness, synthgen, tokmask
from .endpoints import ChatEndpoint, HttpChatEndpoint, MockChatEndpoint
from .errors import ConfigError, ForgeError, TokenizationError
from .records import write_json, write_jsonl
from .tokenizers import TOKENIZER_NAMES, build_tokenizer

log = logging.getLogger(__name__)

STAGES = ("ingest", "chunk", "generate", "unanswerable", "split", "render", "tokenize", "eval")


class StageFailure(ForgeError):
    def __init__(self, stage: str, cause: Exception | str):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def default_config(root: str, output_dir: str = "runs/default") -> dict[str, Any]:
    """The shipped defaults, wired to a corpus root."""
    return {
        "seeds": {"generation": 1301, "unanswerable": 1302, "split": 1303, "eval": 1304},
        "corpus": {
            "root": root,
            "sidecar": None,
            "window": corpus.DEFAULT_WINDOW,
            "overlap": corpus.DEFAULT_OVERLAP,
            "snap_tokens": corpus.DEFAULT_SNAP_TOKENS,
            "tokenizer": "word",
        },
        "synthgen": {
            "questions_per_chunk": synthgen.DEFAULT_QUESTIONS_PER_CHUNK,
            "unanswerable_fraction": synthgen.DEFAULT_UNANSWERABLE_FRACTION,
            "test_size": 8,
            "max_workers": 8,
        },
        "chatform": {"template": "llama31"},
        "tokmask": {"tokenizer": "byte", "max_tokens": tokmask.DEFAULT_MAX_TOKENS},
        "endpoints": {
            "mode": "mock",
            "generator": {"base_url": "", "model": "", "api_key_env": "CQAFORGE_API_KEY"},
            "model": {"base_url": "", "model": "", "api_key_env": "CQAFORGE_API_KEY"},
            "judge": {"base_url": "", "model": "", "api_key_env": "CQAFORGE_API_KEY"},
        },
        "eval": {
            "enabled": True,
            "judgments": evalharness.DEFAULT_JUDGMENTS,
            "score_min": evalharness.DEFAULT_SCORE_MIN,
            "score_max": evalharness.DEFAULT_SCORE_MAX,
        },
        "output_dir": output_dir,
    }


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        payload = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: unparseable config: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return payload


def validate_config(config: dict[str, Any]) -> list[dict[str, str]]:
    """Check every field against its module's constraints.

    Returns the full list of violations (section/field/message records), not
    just the first one.
    """
    violations: list[dict[str, str]] = []

    def violation(section: str, fld: str, message: str) -> None:
        violations.append({"section": section, "field": fld, "message": message})

    def section(name: str) -> dict[str, Any]:
        value = config.get(name)
        if not isinstance(value, dict):
            violation(name, "", "missing section")
            return {}
        return value

    seeds = section("seeds")
    for fld in ("generation", "unanswerable", "split", "eval"):
        if not isinstance(seeds.get(fld), int):
            violation("seeds", fld, "seed must be an integer (seeds are mandatory)")

    corp = section("corpus")
    root = corp.get("root")
    if not root or not Path(root).is_dir():
        violation("corpus", "root", f"root {root!r} is not an existing directory")
    sidecar = corp.get("sidecar")
    if sidecar and not Path(sidecar).is_file():
        violation("corpus", "sidecar", f"sidecar {sidecar!r} does not exist")
    window = corp.get("window", corpus.DEFAULT_WINDOW)
    overlap = corp.get("overlap", corpus.DEFAULT_OVERLAP)
    if not (isinstance(window, int) and isinstance(overlap, int) and window > overlap >= 0):
        violation("corpus", "window", f"window ({window}) must exceed overlap ({overlap}) and overlap must be >= 0")
    if corp.get("tokenizer", "word") not in TOKENIZER_NAMES:
        violation("corpus", "tokenizer", f"unknown tokenizer, expected one of {TOKENIZER_NAMES}")

    synth = section("synthgen")
    per_chunk = synth.get("questions_per_chunk", synthgen.DEFAULT_QUESTIONS_PER_CHUNK)
    if not (isinstance(per_chunk, int) and per_chunk >= 1):
        violation("synthgen", "questions_per_chunk", "must be an integer >= 1")
    fraction = synth.get("unanswerable_fraction", synthgen.DEFAULT_UNANSWERABLE_FRACTION)
    if not (isinstance(fraction, (int, float)) and 0.0 <= float(fraction) <= 1.0):
        violation("synthgen", "unanswerable_fraction", "must be a real in [0, 1]")
    test_size = synth.get("test_size", 0)
    if not (isinstance(test_size, int) and test_size >= 0):
        violation("synthgen", "test_size", "must be an integer >= 0")

    chat = section("chatform")
    template_spec = chat.get("template", "llama31")
    try:
        chatform.load_template(template_spec)
    except ForgeError as exc:
        violation("chatform", "template", str(exc))

    tokm = section("tokmask")
    if tokm.get("tokenizer", "byte") not in TOKENIZER_NAMES:
        violation("tokmask", "tokenizer", f"unknown tokenizer, expected one of {TOKENIZER_NAMES}")
    max_tokens = tokm.get("max_tokens", tokmask.DEFAULT_MAX_TOKENS)
    if not (isinstance(max_tokens, int) and max_tokens >= 16):
        violation("tokmask", "max_tokens", "must be an integer >= 16")

    endpoints = section("endpoints")
    mode = endpoints.get("mode", "mock")
    if mode not in ("mock", "http"):
        violation("endpoints", "mode", "mode must be 'mock' or 'http'")

    ev = section("eval")
    eval_enabled = bool(ev.get("enabled", True))
    judgments = ev.get("judgments", evalharness.DEFAULT_JUDGMENTS)
    if not (isinstance(judgments, int) and judgments >= 1):
        violation("eval", "judgments", "judgments (k) must be an integer >= 1")
    score_min = ev.get("score_min", evalharness.DEFAULT_SCORE_MIN)
    score_max = ev.get("score_max", evalharness.DEFAULT_SCORE_MAX)
    if not (isinstance(score_min, int) and isinstance(score_max, int) and score_min < score_max):
        violation("eval", "score_min", "score range must be integers with score_min < score_max")
    if eval_enabled and isinstance(test_size, int) and test_size == 0:
        violation("eval", "enabled", "eval needs a non-empty test split (synthgen.test_size > 0)")

    if mode == "http":
        names = ("generator", "model", "judge") if eval_enabled else ("generator",)
        for name in names:
            if not (endpoints.get(name) or {}).get("base_url"):
                violation("endpoints", name, "base_url required in http mode")

    if not config.get("output_dir"):
        violation("output_dir", "", "output_dir is required")

    return violations


def _endpoint(config: dict[str, Any], role: str, mode: str, seed: int) -> ChatEndpoint:
    if mode == "mock":
        mock_modes = {"generator": "generate", "model": "answer", "judge": "judge"}
        return MockChatEndpoint(mode=mock_modes[role], seed=seed)
    spec = config["endpoints"][role]
    return HttpChatEndpoint(
        base_url=spec["base_url"],
        model=spec.get("model", ""),
        api_key_env=spec.get("api_key_env", "CQAFORGE_API_KEY"),
    )


def run_pipeline(config: dict[str, Any], output_dir: str | Path | None = None) -> dict[str, Any]:
    """Execute every stage in order; returns the run summary.

    Raises ConfigError when the config does not validate and StageFailure
    (naming the stage) when a stage cannot complete.
    """
    violations = validate_config(config)
    if violations:
        raise ConfigError(f"config has {len(violations)} violation(s): {violations}")

    out = Path(output_dir or config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    seeds = config["seeds"]
    mode = config["endpoints"].get("mode", "mock")
    digest_config = {k: v for k, v in config.items() if k != "output_dir"}
    summary: dict[str, Any] = {
        "config_digest": hashlib.sha256(
            yaml.safe_dump(digest_config, sort_keys=True).encode("utf-8")
        ).hexdigest()[:16],
        "mode": mode,
        "seeds": dict(seeds),
        "stages": {},
    }

    def record_stage(name: str, counts: dict[str, Any], artifacts: list[str]) -> None:
        summary["stages"][name] = {**counts, "artifacts": artifacts}
        log.info("stage %s: %s", name, counts)

    started = time.monotonic()
    corp_cfg = config["corpus"]
    synth_cfg = config["synthgen"]

    # ingest
    try:
        documents, ingest_errors = corpus.ingest_documents(corp_cfg["root"], corp_cfg.get("sidecar"))
        corpus.write_manifest(out / "manifest.jsonl", documents)
        artifacts = ["manifest.jsonl"]
        if ingest_errors:
            write_jsonl(out / "ingest_errors.jsonl", ({"source_path": e.source_path, "error": e.error} for e in ingest_errors))
            artifacts.append("ingest_errors.jsonl")
        record_stage("ingest", {"documents": len(documents), "errors": len(ingest_errors)}, artifacts)
        if not documents:
            raise StageFailure("ingest", "no documents ingested")
    except StageFailure:
        raise
    except ForgeError as exc:
        raise StageFailure("ingest", exc) from exc

    # chunk
    try:
        chunk_tokenizer = build_tokenizer(corp_cfg.get("tokenizer", "word"))
        chunks = []
        for doc in documents:
            chunks.extend(
                corpus.chunk_document(
                    doc,
                    chunk_tokenizer,
                    window=corp_cfg.get("window", corpus.DEFAULT_WINDOW),
                    overlap=corp_cfg.get("overlap", corpus.DEFAULT_OVERLAP),
                    snap_tokens=corp_cfg.get("snap_tokens", corpus.DEFAULT_SNAP_TOKENS),
                )
            )
        corpus.write_chunks(out / "chunks.jsonl", chunks)
        record_stage("chunk", {"chunks": len(chunks)}, ["chunks.jsonl"])
    except ForgeError as exc:
        raise StageFailure("chunk", exc) from exc

    # generate
    try:
        generator = _endpoint(config, "generator", mode, seeds["generation"])
        triplets, failures = synthgen.generate_dataset(
            chunks,
            documents,
            synth_cfg.get("questions_per_chunk", synthgen.DEFAULT_QUESTIONS_PER_CHUNK),
            generator,
            max_workers=synth_cfg.get("max_workers", 8),
        )
        synthgen.write_triplets(out / "triplets.jsonl", triplets)
        artifacts = ["triplets.jsonl"]
        if failures:
            write_jsonl(
                out / "generation_failures.jsonl",
                ({"doc_id": f.doc_id, "chunk_index": f.chunk_index, "error": f.error} for f in failures),
            )
            artifacts.append("generation_failures.jsonl")
        record_stage("generate", {"triplets": len(triplets), "failed_chunks": len(failures)}, artifacts)
        if not triplets:
            raise StageFailure("generate", "no triplets generated")
    except StageFailure:
        raise
    except ForgeError as exc:
        raise StageFailure("generate", exc) from exc

    # unanswerable
    try:
        dataset = synthgen.make_unanswerable(
            triplets,
            float(synth_cfg.get("unanswerable_fraction", synthgen.DEFAULT_UNANSWERABLE_FRACTION)),
            seeds["unanswerable"],
        )
        synthgen.write_triplets(out / "dataset.jsonl", dataset)
        flagged = sum(1 for t in dataset if not t.answerable)
        record_stage("unanswerable", {"samples": len(dataset), "unanswerable": flagged}, ["dataset.jsonl"])
    except ForgeError as exc:
        raise StageFailure("unanswerable", exc) from exc

    # split
    try:
        train, test = synthgen.split_dataset(
            dataset, synthgen.SplitSpec(test_size=synth_cfg.get("test_size", 0), seed=seeds["split"])
        )
        synthgen.write_triplets(out / "train.jsonl", train)
        synthgen.write_triplets(out / "test.jsonl", test)
        record_stage("split", {"train": len(train), "test": len(test)}, ["train.jsonl", "test.jsonl"])
    except ForgeError as exc:
        raise StageFailure("split", exc) from exc

    # render
    try:
        template = chatform.load_template(config["chatform"].get("template", "llama31"))
        rendered = [chatform.render_training_sample(t, template) for t in train]
        write_jsonl(out / "rendered_train.jsonl", (r.to_record() for r in rendered))
        record_stage("render", {"rendered": len(rendered)}, ["rendered_train.jsonl"])
    except ForgeError as exc:
        raise StageFailure("render", exc) from exc

    # tokenize
    try:
        tok = build_tokenizer(config["tokmask"].get("tokenizer", "byte"), special_tokens=template.markers)
        max_tokens = config["tokmask"].get("max_tokens", tokmask.DEFAULT_MAX_TOKENS)
        tokenized = []
        rejections = []
        for sample in rendered:
            try:
                tokenized.append(tokmask.tokenize_and_mask(sample, tok, max_tokens=max_tokens))
            except TokenizationError as exc:
                rejections.append({"sample_id": sample.sample_id, "error": str(exc)})
        if not tokenized:
            raise StageFailure("tokenize", "every sample was rejected")
        manifest = tokmask.write_dataset(tokenized, out / "tokenized_train.jsonl")
        artifacts = ["tokenized_train.jsonl", "tokenized_train.jsonl.manifest.json"]
        if rejections:
            write_jsonl(out / "tokenize_rejections.jsonl", rejections)
            artifacts.append("tokenize_rejections.jsonl")
        record_stage(
            "tokenize",
            {"samples": manifest["sample_count"], "tokens": manifest["token_count"], "rejections": len(rejections)},
            artifacts,
        )
    except StageFailure:
        raise
    except ForgeError as exc:
        raise StageFailure("tokenize", exc) from exc

    # eval
    if config["eval"].get("enabled", True):
        try:
            items, malformed = evalharness.load_benchmark(out / "test.jsonl", "withheld")
            settings = evalharness.EvalSettings(
                judgments=config["eval"].get("judgments", evalharness.DEFAULT_JUDGMENTS),
                score_min=config["eval"].get("score_min", evalharness.DEFAULT_SCORE_MIN),
                score_max=config["eval"].get("score_max", evalharness.DEFAULT_SCORE_MAX),
                max_workers=synth_cfg.get("max_workers", 8),
            )
            scorecard = evalharness.run_benchmark(
                items,
                _endpoint(config, "model", mode, seeds["eval"]),
                _endpoint(config, "judge", mode, seeds["eval"] + 1),
                template,
                benchmark="withheld",
                settings=settings,
            )
            eval_dir = out / "eval"
            write_json(eval_dir / "scorecard.json", scorecard.to_record())
            evalharness.write_histogram_csv(eval_dir / "histogram.csv", scorecard.histogram)
            evalharness.write_verdicts(eval_dir / "verdicts.jsonl", scorecard.per_question)
            record_stage(
                "eval",
                {
                    "questions": scorecard.n_questions,
                    "percent_score": scorecard.percent_score,
                    "excluded_failed_generation": scorecard.excluded_failed_generation,
                    "excluded_invalid_judgment": scorecard.excluded_invalid_judgment,
                    "malformed_rows": len(malformed),
                },
                ["eval/scorecard.json", "eval/histogram.csv", "eval/verdicts.jsonl"],
            )
        except ForgeError as exc:
            raise StageFailure("eval", exc) from exc

    summary["status"] = "completed"
    write_json(out / "run_summary.json", summary)
    log.info("pipeline completed in %.2fs", time.monotonic() - started)
    return summary
