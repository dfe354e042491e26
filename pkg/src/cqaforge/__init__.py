"""cqaforge: synthetic financial CQA datasets, instruction-masked tokenization,
and LLM-as-a-judge evaluation.

The package is organized around the pipeline stages:

- :mod:`cqaforge.corpus` -- document ingestion and token-window chunking
- :mod:`cqaforge.synthgen` -- CQA triplet generation, unanswerable injection, splits
- :mod:`cqaforge.chatform` -- chat/inference/judge prompt rendering from templates
- :mod:`cqaforge.tokmask` -- tokenization with instruction-label masking (-100)
- :mod:`cqaforge.evalharness` -- benchmark runner with self-consistency judging
- :mod:`cqaforge.sweepgen` -- hyperparameter sweep expansion and run selection
- :mod:`cqaforge.pipeline` -- end-to-end pipeline driver and config validation
- :mod:`cqaforge.service` -- FastAPI service exposing every operation
- :mod:`cqaforge.cli` -- the `forge` command line, a thin client of the service
"""

__version__ = "0.1.0"
