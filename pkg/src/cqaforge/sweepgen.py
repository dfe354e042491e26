"""Hyperparameter sweep expansion and best-run selection.

The varied dimensions are learning rate, adapter rank, and the named target
module set; everything else (optimizer, scheduler, batch sizes, dropout,
quantized compute setting) is carried through verbatim as opaque values for
the training driver. Alpha is always derived as 2x the rank.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Sequence

from .errors import SweepError
from .records import read_json, write_json

TARGET_MODULE_SETS: dict[str, list[str]] = {
    "attention_qv": ["q_proj", "v_proj"],
    "all_linear": ["q_proj", "v_proj", "k_proj", "o_proj", "gate_proj", "down_proj", "up_proj"],
}

DEFAULT_FIXED: dict[str, Any] = {
    "lr_scheduler": "cosine",
    "optimizer": "adamw_torch_fused",
    "batch_size": 2,
    "gradient_accumulation_steps": 8,
    "lora_dropout": 0.0,
    "alpha_rule": "2x_rank",
    "load_in_4bit": True,
    "compute_dtype": "bfloat16",
}


@dataclass
class SweepSpec:
    learning_rates: list[float] = field(default_factory=lambda: [4e-5, 1e-4])
    lora_ranks: list[int] = field(default_factory=lambda: [32, 64, 128])
    target_module_sets: dict[str, list[str]] = field(default_factory=lambda: dict(TARGET_MODULE_SETS))
    fixed: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_FIXED))

    def validate(self) -> None:
        for name, values in (
            ("learning_rates", self.learning_rates),
            ("lora_ranks", self.lora_ranks),
            ("target_module_sets", self.target_module_sets),
        ):
            if not values:
                raise SweepError(f"sweep dimension {name!r} is empty")

    @classmethod
    def from_file(cls, path: str | Path) -> "SweepSpec":
        payload = read_json(path)
        spec = cls(
            learning_rates=payload.get("learning_rates", [4e-5, 1e-4]),
            lora_ranks=payload.get("lora_ranks", [32, 64, 128]),
            target_module_sets=payload.get("target_module_sets", dict(TARGET_MODULE_SETS)),
            fixed={**DEFAULT_FIXED, **payload.get("fixed", {})},
        )
        spec.validate()
        return spec


@dataclass
class RunConfig:
    run_id: str
    learning_rate: float
    lora_rank: int
    lora_alpha: int
    target_module_set: str
    target_modules: list[str]
    epochs: int = 1
    fixed: dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "RunConfig":
        return cls(**{f: record[f] for f in cls.__dataclass_fields__ if f in record})


def _run_id(learning_rate: float, lora_rank: int, set_name: str) -> str:
    key = f"lr={learning_rate!r} rank={lora_rank} targets={set_name}"
    digest = hashlib.sha1(key.encode("utf-8")).hexdigest()[:8]
    return f"lr{learning_rate:g}_r{lora_rank}_{set_name}_{digest}"


def expand_sweep(spec: SweepSpec) -> list[RunConfig]:
    """Cartesian product over the varied dimensions, in deterministic order."""
    spec.validate()
    configs = []
    for lr, rank, set_name in product(spec.learning_rates, spec.lora_ranks, sorted(spec.target_module_sets)):
        configs.append(
            RunConfig(
                run_id=_run_id(lr, rank, set_name),
                learning_rate=lr,
                lora_rank=rank,
                lora_alpha=2 * rank,
                target_module_set=set_name,
                target_modules=list(spec.target_module_sets[set_name]),
                epochs=1,
                fixed=dict(spec.fixed),
            )
        )
    ids = [c.run_id for c in configs]
    if len(set(ids)) != len(ids):
        raise SweepError("sweep expansion produced duplicate run_ids")
    return configs


def write_run_configs(configs: Sequence[RunConfig], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for config in configs:
        path = out_dir / f"{config.run_id}.json"
        write_json(path, config.to_record())
        paths.append(path)
    return paths


def read_run_configs(run_dir: str | Path) -> list[RunConfig]:
    return [RunConfig.from_record(read_json(p)) for p in sorted(Path(run_dir).glob("*.json"))]


@dataclass
class SweepResult:
    run_id: str
    percent_score: float
    lora_rank: int | None = None
    learning_rate: float | None = None


def read_results(path: str | Path) -> list[SweepResult]:
    """Result log: JSONL of {run_id, percent_score[, lora_rank, learning_rate]}."""
    results = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            results.append(
                SweepResult(
                    run_id=record["run_id"],
                    percent_score=float(record["percent_score"]),
                    lora_rank=record.get("lora_rank"),
                    learning_rate=record.get("learning_rate"),
                )
            )
    return results


def select_best(
    results: Sequence[SweepResult],
    configs: Sequence[RunConfig] = (),
) -> dict[str, Any]:
    """Best run by percent score; ties prefer the cheaper configuration.

    Tie-breaking uses smaller rank then smaller learning rate, resolved from
    the result records or the supplied run configs; runs with unknown cost
    sort after known ones, and run_id keeps the order total.
    """
    if not results:
        raise SweepError("empty result log")
    by_id = {c.run_id: c for c in configs}

    def cost(r: SweepResult) -> tuple[float, float, str]:
        config = by_id.get(r.run_id)
        rank = r.lora_rank if r.lora_rank is not None else (config.lora_rank if config else float("inf"))
        lr = r.learning_rate if r.learning_rate is not None else (config.learning_rate if config else float("inf"))
        return (float(rank), float(lr), r.run_id)

    best = min(results, key=lambda r: (-r.percent_score, *cost(r)))
    scores = [r.percent_score for r in results]
    return {
        "best_run_id": best.run_id,
        "best_score": best.percent_score,
        "margin": max(scores) - min(scores),
        "n_results": len(results),
    }
