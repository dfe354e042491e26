"""Chat endpoint clients: request shape, retries, and the deterministic mock."""

from __future__ import annotations

import json

import pytest

from cqaforge.endpoints import (
    HttpChatEndpoint,
    MockChatEndpoint,
    build_request_body,
    call_with_retries,
)
from cqaforge.errors import ConfigError, EndpointError

from conftest import ScriptedEndpoint


class TestRequestBody:
    def test_deterministic(self):
        messages = [{"role": "user", "content": "hello"}]
        a = json.dumps(build_request_body("m", messages, 0.0, 128, 1.0))
        b = json.dumps(build_request_body("m", messages, 0.0, 128, 1.0))
        assert a == b

    def test_temperature_zero_greedy(self):
        body = build_request_body("m", [{"role": "user", "content": "x"}], 0.0, top_p=1.0)
        assert body["temperature"] == 0
        assert body["top_p"] == 1.0

    def test_optional_fields_omitted(self):
        body = build_request_body("m", [{"role": "user", "content": "x"}], 0.7)
        assert "top_p" not in body and "max_tokens" not in body


class TestRetries:
    def test_recovers_after_transient_failures(self):
        endpoint = ScriptedEndpoint(["payload"], fail_first=2)
        result = call_with_retries(
            lambda: endpoint.complete([{"role": "user", "content": "q"}], temperature=0.0),
            retries=3,
            backoff_s=0.0,
        )
        assert result == "payload" and len(endpoint.calls) == 3

    def test_gives_up_with_endpoint_error(self):
        endpoint = ScriptedEndpoint(["payload"], fail_first=99)
        with pytest.raises(EndpointError, match="after 2 attempts"):
            call_with_retries(
                lambda: endpoint.complete([{"role": "user", "content": "q"}], temperature=0.0),
                retries=2,
                backoff_s=0.0,
            )


class TestHttpEndpoint:
    def test_posts_openai_wire_shape(self):
        import httpx

        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["url"] = str(request.url)
            seen["body"] = json.loads(request.content)
            return httpx.Response(
                200,
                json={"choices": [{"message": {"role": "assistant", "content": "pong"}}]},
            )

        client = httpx.Client(transport=httpx.MockTransport(handler))
        endpoint = HttpChatEndpoint("http://svc/v1", model="finqa-answerer", client=client, max_retries=1)
        out = endpoint.complete([{"role": "user", "content": "ping"}], temperature=0.0, top_p=1.0)
        assert out == "pong"
        assert seen["url"] == "http://svc/v1/chat/completions"
        assert seen["body"]["temperature"] == 0
        assert seen["body"]["model"] == "finqa-answerer"

    def test_http_failure_raises_endpoint_error(self):
        import httpx

        client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500)))
        endpoint = HttpChatEndpoint("http://svc/v1", model="m", client=client, max_retries=2, backoff_s=0.0)
        with pytest.raises(EndpointError):
            endpoint.complete([{"role": "user", "content": "x"}], temperature=0.0)


class TestMock:
    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigError):
            MockChatEndpoint(mode="chat")

    def test_generate_emits_requested_pairs(self):
        prompt = (
            "Write 3 question-answer pairs about it.\n\nContext:\nAlpha reported revenue. "
            "Beta approved dividends. Gamma hired staff."
        )
        out = MockChatEndpoint(mode="generate", seed=1).complete(
            [{"role": "user", "content": prompt}], temperature=0.7
        )
        assert out.count("QUESTION:") == 3 and out.count("ANSWER:") == 3

    def test_deterministic_across_instances(self):
        prompt = "Write 2 question-answer pairs about it.\n\nContext:\nOne fact. Another fact."
        messages = [{"role": "user", "content": prompt}]
        a = MockChatEndpoint(mode="generate", seed=5).complete(messages, temperature=0.7)
        b = MockChatEndpoint(mode="generate", seed=5).complete(messages, temperature=0.7)
        assert a == b
        c = MockChatEndpoint(mode="generate", seed=6).complete(messages, temperature=0.7)
        assert isinstance(c, str)

    def test_judge_ends_with_lone_integer(self):
        prompt = (
            "Question:\nq\n\nReference answer:\nrevenue rose sharply\n\n"
            "Candidate answer:\nrevenue rose sharply\n\nWork step by step: ...\n"
            "output the final score as a single integer between 0 and 10 on the last line"
        )
        out = MockChatEndpoint(mode="judge", seed=0).complete([{"role": "user", "content": prompt}], temperature=0.0)
        assert out.splitlines()[-1].strip() == "10"

    def test_answer_extracts_from_context(self):
        prompt = (
            "Context:\nAurora reported revenue of 5 million euros. The weather was mild.\n\n"
            "Question:\nWhat revenue did Aurora report?"
        )
        out = MockChatEndpoint(mode="answer", seed=0).complete([{"role": "user", "content": prompt}], temperature=0.0)
        assert out == "Aurora reported revenue of 5 million euros."
