from __future__ import annotations

import json
import math
import threading

import httpx
import pytest

from evalkit.errors import (
    AuthError,
    ProtocolError,
    RequestTooLargeError,
    RetriesExhaustedError,
    TransientProviderError,
    UnknownPromptError,
)
from evalkit.model import ModelSpec
from evalkit.providers import (
    Gateway,
    GenerationRequest,
    SamplingParams,
    prompt_hash,
    register_script,
    script_from_map,
)
from evalkit import prompts


def mock_model(seed=42, name="mock-a"):
    return ModelSpec(provider="mock", model_name=name, seed=seed)


def request(user="hello world", seed=42, **kw):
    return GenerationRequest(user=user, sampling=SamplingParams(seed=seed), **kw)


class TestMockProvider:
    def test_deterministic(self):
        gw = Gateway()
        a = gw.generate(mock_model(), request())
        b = gw.generate(mock_model(), request())
        assert a == b
        assert a.text

    def test_seed_changes_text(self):
        gw = Gateway()
        a = gw.generate(mock_model(), request(seed=1))
        b = gw.generate(mock_model(), request(seed=2))
        assert a.text != b.text

    def test_prompt_changes_text(self):
        gw = Gateway()
        assert (
            gw.generate(mock_model(), request(user="one")).text
            != gw.generate(mock_model(), request(user="two")).text
        )

    def test_rating_prompt_gets_logprob_alternatives(self):
        gw = Gateway()
        user = f"judge this.\n\nRespond with only a {prompts.RATING_MARKER} from 1 to 5."
        result = gw.generate(
            mock_model(), request(user=user, want_logprobs=True, top_logprobs=20)
        )
        assert result.text.strip().isdigit()
        assert 1 <= int(result.text) <= 5
        [entry] = result.token_logprobs
        assert len(entry.top_alternatives) >= 2
        total = sum(math.exp(lp) for _, lp in entry.top_alternatives)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_ternary_prompt_answers_in_set(self):
        gw = Gateway()
        user = f"context\n\nAnswer with {prompts.TERNARY_MARKER}."
        assert gw.generate(mock_model(), request(user=user)).text in {
            "yes", "no", "unknown"
        }

    def test_question_prompt_lists_questions(self):
        gw = Gateway()
        user = f"document\n\nWrite {prompts.QUESTIONS_MARKER} please."
        lines = gw.generate(mock_model(), request(user=user)).text.splitlines()
        assert len(lines) == 10
        assert all(line.endswith("?") for line in lines)


class TestScriptedProvider:
    def test_lookup_by_text_and_hash(self):
        register_script(
            "fixture",
            script_from_map({"known": "answer", prompt_hash("hashed"): "by hash"}),
        )
        spec = ModelSpec(provider="scripted", model_name="fixture")
        gw = Gateway()
        assert gw.generate(spec, request(user="known")).text == "answer"
        assert gw.generate(spec, request(user="hashed")).text == "by hash"
        with pytest.raises(UnknownPromptError):
            gw.generate(spec, request(user="unknown"))

    def test_batch_isolates_item_failures(self):
        register_script("fixture", script_from_map({f"p{i}": f"r{i}" for i in range(5) if i != 2}))
        spec = ModelSpec(provider="scripted", model_name="fixture")
        results = Gateway().generate_batch(spec, [request(user=f"p{i}") for i in range(5)])
        assert [r.text for i, r in enumerate(results) if i != 2] == ["r0", "r1", "r3", "r4"]
        assert isinstance(results[2], UnknownPromptError)


class TestBatchConcurrency:
    def test_alignment_and_order(self):
        gw = Gateway(max_in_flight=3)
        reqs = [request(user=f"prompt {i}") for i in range(10)]
        results = gw.generate_batch(mock_model(), reqs)
        assert len(results) == 10
        solo = [gw.generate(mock_model(), r).text for r in reqs]
        assert [r.text for r in results] == solo

    def test_max_in_flight_bound(self):
        lock = threading.Lock()
        state = {"active": 0, "peak": 0}
        barrier_event = threading.Event()

        def handler(req):
            with lock:
                state["active"] += 1
                state["peak"] = max(state["peak"], state["active"])
            barrier_event.wait(timeout=0.02)
            with lock:
                state["active"] -= 1
            return "ok"

        register_script("instrumented", handler)
        spec = ModelSpec(provider="scripted", model_name="instrumented")
        gw = Gateway(max_in_flight=2)
        gw.generate_batch(spec, [request(user=f"p{i}") for i in range(12)])
        assert state["peak"] <= 2


class TestRetryPolicy:
    def _flaky(self, failures: int, exc=TransientProviderError):
        calls = {"n": 0}

        def handler(req):
            calls["n"] += 1
            if calls["n"] <= failures:
                raise exc("boom")
            return "recovered"

        register_script("flaky", handler)
        return ModelSpec(provider="scripted", model_name="flaky"), calls

    def test_transient_failures_retried_with_backoff(self):
        sleeps = []
        spec, calls = self._flaky(2)
        gw = Gateway(max_attempts=5, sleep=sleeps.append)
        assert gw.generate(spec, request()).text == "recovered"
        assert calls["n"] == 3
        assert len(sleeps) == 2
        # base 0.5, factor 2, jitter +-20%
        assert 0.4 <= sleeps[0] <= 0.6
        assert 0.8 <= sleeps[1] <= 1.2

    def test_retries_exhausted_carries_last_cause(self):
        spec, calls = self._flaky(10)
        gw = Gateway(max_attempts=5, sleep=lambda s: None)
        with pytest.raises(RetriesExhaustedError) as info:
            gw.generate(spec, request())
        assert calls["n"] == 5
        assert isinstance(info.value.last_cause, TransientProviderError)

    def test_non_retryable_never_retried(self):
        spec, calls = self._flaky(10, exc=AuthError)
        gw = Gateway(max_attempts=5, sleep=lambda s: None)
        with pytest.raises(AuthError):
            gw.generate(spec, request())
        assert calls["n"] == 1


def openai_spec(**kw):
    return ModelSpec(
        provider="openai_compatible",
        model_name="served-model",
        endpoint_url="http://localhost:9000",
        temperature=0.7,
        top_p=0.95,
        seed=42,
        **kw,
    )


def completions_payload(text="fine", logprobs=None):
    choice = {"message": {"role": "assistant", "content": text}}
    if logprobs is not None:
        choice["logprobs"] = {"content": logprobs}
    return {
        "choices": [choice],
        "usage": {"prompt_tokens": 7, "completion_tokens": 2},
        "system_fingerprint": "fp-1",
    }


class TestOpenAICompatible:
    def _gateway(self, handler, **kw):
        return Gateway(transport=httpx.MockTransport(handler), sleep=lambda s: None, **kw)

    def test_wire_format(self):
        seen = {}

        def handler(req: httpx.Request) -> httpx.Response:
            seen["url"] = str(req.url)
            seen["body"] = json.loads(req.content)
            seen["auth"] = req.headers.get("authorization")
            return httpx.Response(200, json=completions_payload())

        gw = self._gateway(handler)
        result = gw.generate(
            openai_spec(),
            GenerationRequest(
                user="hi", system="sys",
                sampling=SamplingParams(temperature=0.7, top_p=0.95, seed=42, max_tokens=64),
                want_logprobs=True, top_logprobs=20,
            ),
        )
        assert result.text == "fine"
        assert result.model_fingerprint == "fp-1"
        assert result.usage == {"prompt_tokens": 7, "completion_tokens": 2}
        assert seen["url"] == "http://localhost:9000/v1/chat/completions"
        body = seen["body"]
        assert body["model"] == "served-model"
        assert body["messages"] == [
            {"role": "system", "content": "sys"},
            {"role": "user", "content": "hi"},
        ]
        assert body["temperature"] == 0.7
        assert body["top_p"] == 0.95
        assert body["seed"] == 42
        assert body["max_tokens"] == 64
        assert body["logprobs"] is True
        assert body["top_logprobs"] == 20
        assert seen["auth"] is None  # keyless endpoint

    def test_api_key_from_env(self, monkeypatch):
        monkeypatch.setenv("TEST_PROVIDER_KEY", "sk-123")

        def handler(req):
            assert req.headers["authorization"] == "Bearer sk-123"
            return httpx.Response(200, json=completions_payload())

        gw = self._gateway(handler)
        gw.generate(openai_spec(api_key_env="TEST_PROVIDER_KEY"), request())

    def test_missing_api_key_is_auth_error(self, monkeypatch):
        monkeypatch.delenv("ABSENT_KEY", raising=False)
        gw = self._gateway(lambda req: httpx.Response(200, json=completions_payload()))
        with pytest.raises(AuthError, match="ABSENT_KEY"):
            gw.generate(openai_spec(api_key_env="ABSENT_KEY"), request())

    def test_logprobs_parsed(self):
        lp = [
            {
                "token": "5",
                "logprob": -0.1,
                "top_logprobs": [
                    {"token": "5", "logprob": -0.1},
                    {"token": "4", "logprob": -2.5},
                ],
            }
        ]
        gw = self._gateway(
            lambda req: httpx.Response(200, json=completions_payload("5", logprobs=lp))
        )
        result = gw.generate(openai_spec(), request(want_logprobs=True, top_logprobs=20))
        [entry] = result.token_logprobs
        assert entry.token == "5"
        assert entry.top_alternatives == (("5", -0.1), ("4", -2.5))

    @pytest.mark.parametrize(
        "status,exc",
        [(401, AuthError), (403, AuthError), (413, RequestTooLargeError)],
    )
    def test_non_retryable_statuses(self, status, exc):
        calls = {"n": 0}

        def handler(req):
            calls["n"] += 1
            return httpx.Response(status)

        gw = self._gateway(handler)
        with pytest.raises(exc):
            gw.generate(openai_spec(), request())
        assert calls["n"] == 1

    @pytest.mark.parametrize("status", [429, 500, 503])
    def test_transient_statuses_retried_up_to_cap(self, status):
        calls = {"n": 0}

        def handler(req):
            calls["n"] += 1
            return httpx.Response(status)

        gw = self._gateway(handler, max_attempts=3)
        with pytest.raises(RetriesExhaustedError):
            gw.generate(openai_spec(), request())
        assert calls["n"] == 3

    def test_recovery_after_transient(self):
        calls = {"n": 0}

        def handler(req):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(429)
            return httpx.Response(200, json=completions_payload("ok"))

        gw = self._gateway(handler)
        assert gw.generate(openai_spec(), request()).text == "ok"

    def test_malformed_response_is_protocol_error(self):
        gw = self._gateway(lambda req: httpx.Response(200, json={"nope": 1}))
        with pytest.raises(ProtocolError):
            gw.generate(openai_spec(), request())

    def test_timeout_retried_then_exhausted(self):
        def handler(req):
            raise httpx.ConnectTimeout("slow")

        gw = self._gateway(handler, max_attempts=2)
        with pytest.raises(RetriesExhaustedError) as info:
            gw.generate(openai_spec(), request())
        assert isinstance(info.value.last_cause, TransientProviderError)


def test_request_invariants():
    with pytest.raises(Exception, match="nonempty"):
        GenerationRequest(user="")
    with pytest.raises(Exception, match="want_logprobs"):
        GenerationRequest(user="x", top_logprobs=5)
    with pytest.raises(Exception, match="0..20"):
        GenerationRequest(user="x", want_logprobs=True, top_logprobs=21)
