"""Benchmark loading, judging, and scorecard aggregation."""

from __future__ import annotations

import json
import random

import pytest

from cqaforge.chatform import load_template
from cqaforge.errors import BenchmarkError
from cqaforge.evalharness import (
    BenchmarkItem,
    EvalSettings,
    JudgeVerdict,
    aggregate_scorecard,
    generate_answer,
    judge_answer,
    load_benchmark,
    load_field_maps,
    parse_score,
    run_benchmark,
    score_histogram,
)
from cqaforge.records import write_jsonl

from conftest import ScriptedEndpoint


def item(i: int = 0) -> BenchmarkItem:
    return BenchmarkItem(
        question_id=f"q{i:03d}",
        context=f"Company {i} reported revenue of {i + 1} million euros.",
        question=f"What did company {i} report?",
        reference_answer=f"Revenue of {i + 1} million euros.",
        source="custom",
    )


class TestLoadBenchmark:
    def test_withheld_adapter(self, tmp_path):
        path = tmp_path / "test.jsonl"
        write_jsonl(
            path,
            (
                {"sample_id": f"s{i}", "context": "ctx", "question": "q?", "answer": "a"}
                for i in range(10)
            ),
        )
        items, malformed = load_benchmark(path, "withheld")
        assert len(items) == 10 and malformed == []
        assert items[0].question_id == "s0" and items[0].reference_answer == "a"

    def test_empty_file_is_error(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(BenchmarkError, match="no valid"):
            load_benchmark(path, "custom")

    def test_malformed_row_reported_with_index(self, tmp_path):
        path = tmp_path / "bench.jsonl"
        rows = [
            {"question_id": f"q{i}", "context": "c", "question": "q", "reference_answer": "r"}
            for i in range(5)
        ]
        rows[2] = {"question_id": "q2", "context": "", "question": "q", "reference_answer": "r"}
        write_jsonl(path, rows)
        items, malformed = load_benchmark(path, "custom")
        assert len(items) == 4
        assert len(malformed) == 1 and malformed[0]["line"] == 2

    def test_unknown_adapter(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text("{}\n", encoding="utf-8")
        with pytest.raises(BenchmarkError, match="unknown benchmark adapter"):
            load_benchmark(path, "mystery")

    def test_field_map_override(self, tmp_path):
        maps_path = tmp_path / "maps.json"
        maps_path.write_text(json.dumps({"financebench": {"context": "ctx_text"}}), encoding="utf-8")
        maps = load_field_maps(maps_path)
        assert maps["financebench"]["context"] == "ctx_text"
        assert maps["financebench"]["question"] == "question"

    def test_financebench_layout(self, tmp_path):
        path = tmp_path / "fb.jsonl"
        write_jsonl(
            path,
            [{"financebench_id": "fb1", "evidence_text": "ev", "question": "q", "answer": "a"}],
        )
        items, _ = load_benchmark(path, "financebench")
        assert items[0].question_id == "fb1" and items[0].context == "ev"


class TestGenerateAnswer:
    def test_request_carries_greedy_settings(self):
        endpoint = ScriptedEndpoint(["candidate text"])
        out = generate_answer(item(), endpoint, load_template("llama31"))
        assert out == "candidate text"
        call = endpoint.calls[0]
        assert call["temperature"] == 0.0 and call["top_p"] == 1.0

    def test_identical_item_identical_request(self):
        endpoint = ScriptedEndpoint(["x"])
        generate_answer(item(), endpoint, load_template("llama31"))
        generate_answer(item(), endpoint, load_template("llama31"))
        assert endpoint.calls[0] == endpoint.calls[1]

    def test_echo_stub(self):
        endpoint = ScriptedEndpoint(["ECHO"])
        assert generate_answer(item(), endpoint, load_template("plain")) == "ECHO"


class TestParseScore:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("9", 9),
            ("Reasoning about the answer...\nScore: 8", 8),
            ("I considered 3 factors.\n7", 7),
            ("no score here", None),
            ("55", None),
            ("8.5", None),
            ("the answer scores 6 out of 10", 10),
            ("-3", None),
            ("0", 0),
        ],
    )
    def test_final_integer_rule(self, raw, expected):
        assert parse_score(raw, 0, 10) == expected

    def test_range_configurable(self):
        assert parse_score("12", 1, 20) == 12
        assert parse_score("0", 1, 10) is None


class TestJudgeAnswer:
    def test_constant_judge(self):
        verdict = judge_answer(item(), "cand", ScriptedEndpoint(["9"]), load_template("plain"))
        assert verdict.scores == [9, 9, 9] and verdict.mean_score == 9.0

    def test_three_different_scores(self):
        verdict = judge_answer(item(), "cand", ScriptedEndpoint(["7", "8", "9"]), load_template("plain"))
        assert verdict.scores == [7, 8, 9] and verdict.mean_score == 8.0

    def test_chain_of_thought_parsed(self):
        verdict = judge_answer(
            item(), "cand", ScriptedEndpoint(["Reasoning... Score: 8"]), load_template("plain")
        )
        assert verdict.scores == [8, 8, 8]

    def test_unparseable_gets_one_reask_then_invalid(self):
        endpoint = ScriptedEndpoint(["no digits at all"])
        verdict = judge_answer(item(), "cand", endpoint, load_template("plain"))
        assert not verdict.valid
        assert len(endpoint.calls) == 2  # first ask + one bounded re-ask
        assert verdict.mean_score is None

    def test_reask_recovers(self):
        endpoint = ScriptedEndpoint(["unclear", "8", "8", "8"])
        verdict = judge_answer(item(), "cand", endpoint, load_template("plain"))
        assert verdict.valid and verdict.scores == [8, 8, 8]

    def test_k_configurable(self):
        verdict = judge_answer(
            item(), "c", ScriptedEndpoint(["5"]), load_template("plain"), settings=EvalSettings(judgments=5)
        )
        assert len(verdict.scores) == 5


def make_verdict(qid: str, scores: list[int]) -> JudgeVerdict:
    return JudgeVerdict(
        question_id=qid,
        candidate_answer="c",
        scores=scores,
        mean_score=sum(scores) / len(scores),
        raw_judge_outputs=[str(s) for s in scores],
    )


class TestAggregation:
    def test_perfect_score(self):
        card = aggregate_scorecard([make_verdict("a", [10, 10, 10])], "withheld")
        assert card.percent_score == 100.0

    def test_hand_arithmetic(self):
        card = aggregate_scorecard([make_verdict("a", [9, 9, 9]), make_verdict("b", [10, 10, 10])], "withheld")
        assert card.percent_score == 95.0

    def test_table_style_mapping(self):
        # mean score 8.896 -> percent 88.96
        verdicts = [make_verdict(f"q{i}", [9]) for i in range(896)] + [make_verdict(f"r{i}", [8]) for i in range(104)]
        card = aggregate_scorecard(verdicts, "withheld", settings=EvalSettings(judgments=1))
        assert card.percent_score == pytest.approx(88.96, abs=1e-12)

    def test_permutation_invariance(self):
        rng = random.Random(5)
        verdicts = [make_verdict(f"q{i}", [rng.randint(0, 10) for _ in range(3)]) for i in range(50)]
        base = aggregate_scorecard(verdicts, "withheld")
        shuffled = list(verdicts)
        rng.shuffle(shuffled)
        other = aggregate_scorecard(shuffled, "withheld")
        assert other.percent_score == base.percent_score
        assert other.histogram == base.histogram
        assert [v.question_id for v in other.per_question] == [v.question_id for v in base.per_question]

    def test_exclusions_counted_not_scored(self):
        invalid = JudgeVerdict("bad", "c", [], None, [], valid=False, error="unparseable")
        card = aggregate_scorecard(
            [make_verdict("a", [10, 10, 10]), invalid], "withheld", excluded_failed_generation=2
        )
        assert card.n_questions == 1
        assert card.percent_score == 100.0
        assert card.excluded_failed_generation == 2
        assert card.excluded_invalid_judgment == 1

    def test_zero_valid_verdicts(self):
        invalid = JudgeVerdict("bad", "c", [], None, [], valid=False)
        with pytest.raises(BenchmarkError):
            aggregate_scorecard([invalid], "withheld")

    def test_histogram_sums_to_n_times_k(self):
        verdicts = [make_verdict(f"q{i}", [i % 11, (i * 3) % 11, (i * 7) % 11]) for i in range(30)]
        card = aggregate_scorecard(verdicts, "withheld")
        assert sum(card.histogram.values()) == 30 * 3


class TestHistogram:
    def test_single_question_all_tens(self):
        counts = score_histogram([make_verdict("a", [10, 10, 10])])
        assert counts[10] == 3 and sum(counts.values()) == 3

    def test_hand_count(self):
        counts = score_histogram([make_verdict("a", [7, 8]), make_verdict("b", [8, 8])])
        assert counts[7] == 1 and counts[8] == 3

    def test_zero_bucket_supported(self):
        counts = score_histogram([make_verdict("a", [0, 0, 10])])
        assert counts[0] == 2 and counts[10] == 1


class TestRunBenchmark:
    def test_end_to_end_with_stubs(self):
        items = [item(i) for i in range(4)]
        card = run_benchmark(
            items,
            ScriptedEndpoint(["an answer"]),
            ScriptedEndpoint(["7", "8", "9"] * 4),
            load_template("plain"),
            benchmark="custom",
            settings=EvalSettings(max_workers=1),
        )
        assert card.n_questions == 4
        assert card.excluded_failed_generation == 0

    def test_failed_generation_excluded_with_count(self):
        card = run_benchmark(
            [item(0), item(1), item(2)],
            FailingEndpointOnce(),
            ScriptedEndpoint(["9"]),
            load_template("plain"),
            benchmark="custom",
            settings=EvalSettings(max_workers=1),
        )
        assert card.excluded_failed_generation == 1
        assert card.n_questions == 2


class FailingEndpointOnce:
    """Fails the first call with EndpointError, then answers."""

    def __init__(self):
        self.calls = 0

    def complete(self, messages, **kwargs):
        from cqaforge.errors import EndpointError

        self.calls += 1
        if self.calls == 1:
            raise EndpointError("degraded upstream")
        return "recovered answer"
