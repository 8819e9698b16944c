"""Uniform client for text-generation providers.

Three providers share one interface: ``openai_compatible`` speaks the OpenAI
chat-completions wire schema against any conforming endpoint, ``mock`` is a
deterministic offline stand-in, and ``scripted`` replays registered fixtures
for tests. Transient failures are retried with capped exponential backoff;
typed ProviderError subclasses mark everything else non-retryable.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import httpx

from . import prompts
from .errors import (
    AuthError,
    ConfigurationError,
    ProtocolError,
    ProviderError,
    RequestTooLargeError,
    RetriesExhaustedError,
    TransientProviderError,
    UnknownPromptError,
)
from .model import ModelSpec, TokenLogprob

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    top_p: float = 1.0
    seed: int | None = None
    max_tokens: int | None = None

    @classmethod
    def from_model(cls, model: ModelSpec) -> "SamplingParams":
        return cls(
            temperature=model.temperature,
            top_p=model.top_p,
            seed=model.seed,
            max_tokens=model.max_tokens,
        )


@dataclass(frozen=True)
class GenerationRequest:
    """One prompt to complete, with sampling and logprob options."""

    user: str
    system: str | None = None
    sampling: SamplingParams = field(default_factory=SamplingParams)
    want_logprobs: bool = False
    top_logprobs: int = 0

    def __post_init__(self):
        if not self.user:
            raise ConfigurationError("GenerationRequest.user must be nonempty")
        if not (0 <= self.top_logprobs <= 20):
            raise ConfigurationError("top_logprobs must be in 0..20")
        if self.top_logprobs > 0 and not self.want_logprobs:
            raise ConfigurationError("top_logprobs > 0 requires want_logprobs")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    token_logprobs: tuple[TokenLogprob, ...] | None = None
    usage: dict[str, int] = field(default_factory=dict)
    model_fingerprint: str | None = None


ScriptHandler = Callable[[GenerationRequest], "GenerationResult | str"]

_SCRIPTS: dict[str, ScriptHandler] = {}


def register_script(name: str, handler: ScriptHandler) -> None:
    """Register a fixture handler for ModelSpec(provider="scripted", model_name=name)."""
    _SCRIPTS[name] = handler


def clear_scripts() -> None:
    _SCRIPTS.clear()


def prompt_hash(user: str) -> str:
    return hashlib.sha256(user.encode("utf-8")).hexdigest()[:16]


def script_from_map(mapping: dict[str, "GenerationResult | str"]) -> ScriptHandler:
    """Fixture handler looking up responses by exact user text or prompt hash."""

    def handler(request: GenerationRequest) -> GenerationResult | str:
        if request.user in mapping:
            return mapping[request.user]
        hashed = prompt_hash(request.user)
        if hashed in mapping:
            return mapping[hashed]
        raise UnknownPromptError(f"no scripted response for prompt hash {hashed}")

    return handler


# Syllables used to expand digest bytes into pronounceable pseudo-words.
_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _pseudo_word(byte_a: int, byte_b: int) -> str:
    return (
        _CONSONANTS[byte_a % 14] + _VOWELS[byte_a % 5]
        + _CONSONANTS[byte_b % 14] + _VOWELS[byte_b % 5]
    )


class MockProvider:
    """Deterministic offline provider: a pure function of (model, request).

    Output text derives from a SHA-256 digest of the model name, seed, and
    prompt. When the prompt ends with one of the toolkit's structured-output
    instructions (rating, ternary answer, question list, equivalence verdict)
    the response follows that instruction so offline pipelines can exercise
    every metric family.
    """

    def generate(self, model: ModelSpec, request: GenerationRequest) -> GenerationResult:
        digest = hashlib.sha256(
            "|".join(
                [
                    model.model_name,
                    str(request.sampling.seed),
                    request.system or "",
                    request.user,
                ]
            ).encode("utf-8")
        ).digest()
        user = request.user

        if prompts.RATING_MARKER in user:
            return self._rating(digest, request)
        if prompts.TERNARY_MARKER in user:
            text = ("yes", "no", "yes", "no", "unknown")[digest[0] % 5]
        elif prompts.EQUIVALENCE_MARKER in user:
            text = ("equivalent", "different")[digest[0] % 2]
        elif prompts.QUESTIONS_MARKER in user:
            text = "\n".join(
                f"Is the {_pseudo_word(digest[i], digest[i + 1])} "
                f"{_pseudo_word(digest[i + 2], digest[i + 3])} correct?"
                for i in range(0, 20, 2)
            )
        else:
            text = self._sentences(digest)

        return self._result(text, request, digest)

    def _sentences(self, digest: bytes) -> str:
        sentences = []
        for start in range(0, 24, 8):
            words = [
                _pseudo_word(digest[i], digest[i + 1])
                for i in range(start, start + 8, 2)
            ]
            sentences.append(" ".join(words).capitalize() + ".")
        return " ".join(sentences)

    def _rating(self, digest: bytes, request: GenerationRequest) -> GenerationResult:
        scale = range(1, 6)
        rating = scale[digest[0] % len(scale)]
        text = str(rating)
        if not request.want_logprobs:
            return self._result(text, request, digest, logprobs=None)
        # Spread probability mass over three in-scale ratings, weights from
        # digest bytes, so the rating position always has >= 2 alternatives.
        candidates = sorted({rating, scale[digest[1] % 5], scale[digest[2] % 5],
                             scale[(digest[2] + 1) % 5]})[:3]
        if len(candidates) < 2:
            candidates = sorted({rating, rating % 5 + 1})
        weights = [1.0 + digest[3 + i] / 64.0 for i in range(len(candidates))]
        total = sum(weights)
        alts = tuple(
            (str(c), math.log(w / total)) for c, w in zip(candidates, weights)
        )
        chosen = max(alts, key=lambda a: a[1])
        logprobs = (TokenLogprob(chosen[0], chosen[1], top_alternatives=alts),)
        return self._result(chosen[0], request, digest, logprobs=logprobs)

    def _result(
        self,
        text: str,
        request: GenerationRequest,
        digest: bytes,
        logprobs: tuple[TokenLogprob, ...] | None = None,
    ) -> GenerationResult:
        if request.want_logprobs and logprobs is None:
            logprobs = tuple(
                TokenLogprob(
                    token=tok,
                    logprob=-(digest[i % 32] / 64.0),
                    top_alternatives=(
                        (tok, -(digest[i % 32] / 64.0)),
                        (_pseudo_word(digest[(i + 1) % 32], digest[(i + 2) % 32]),
                         -(digest[(i + 3) % 32] / 16.0) - 1.0),
                    ),
                )
                for i, tok in enumerate(text.split())
            )
        return GenerationResult(
            text=text,
            token_logprobs=logprobs,
            usage={
                "prompt_tokens": len(request.user.split()),
                "completion_tokens": len(text.split()),
            },
            model_fingerprint="mock",
        )


class ScriptedProvider:
    """Replays responses registered under the model name."""

    def generate(self, model: ModelSpec, request: GenerationRequest) -> GenerationResult:
        handler = _SCRIPTS.get(model.model_name)
        if handler is None:
            raise ConfigurationError(
                f"no script registered under {model.model_name!r}"
            )
        out = handler(request)
        if isinstance(out, str):
            out = GenerationResult(
                text=out,
                usage={
                    "prompt_tokens": len(request.user.split()),
                    "completion_tokens": len(out.split()),
                },
            )
        return out


class OpenAICompatibleProvider:
    """Chat-completions client for OpenAI-compatible endpoints."""

    def __init__(self, timeout: float = 120.0, transport: httpx.BaseTransport | None = None):
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self):
        self._client.close()

    def generate(self, model: ModelSpec, request: GenerationRequest) -> GenerationResult:
        url = model.endpoint_url.rstrip("/")
        if not url.endswith("/chat/completions"):
            url += "/v1/chat/completions"

        headers = {}
        if model.api_key_env:
            key = os.environ.get(model.api_key_env)
            if not key:
                raise AuthError(
                    f"API key env var {model.api_key_env!r} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"

        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        payload: dict = {
            "model": model.model_name,
            "messages": messages,
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
        }
        if request.sampling.seed is not None:
            payload["seed"] = request.sampling.seed
        if request.sampling.max_tokens is not None:
            payload["max_tokens"] = request.sampling.max_tokens
        if request.want_logprobs:
            payload["logprobs"] = True
            if request.top_logprobs:
                payload["top_logprobs"] = request.top_logprobs

        try:
            resp = self._client.post(url, json=payload, headers=headers)
        except httpx.TimeoutException as exc:
            raise TransientProviderError(f"request timed out: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientProviderError(f"transport failure: {exc}") from exc

        if resp.status_code in (401, 403):
            raise AuthError(f"authentication failed ({resp.status_code})")
        if resp.status_code == 413:
            raise RequestTooLargeError("request rejected as too large (413)")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(
                f"endpoint returned {resp.status_code}"
            )
        if resp.status_code != 200:
            raise ProviderError(
                f"endpoint returned {resp.status_code}: {resp.text[:200]}"
            )

        try:
            body = resp.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat-completions response: {exc}") from exc
        if text is None:
            raise ProtocolError("response contained no message content")

        token_logprobs = None
        lp_content = (choice.get("logprobs") or {}).get("content")
        if lp_content:
            token_logprobs = tuple(
                TokenLogprob(
                    token=entry["token"],
                    logprob=entry["logprob"],
                    top_alternatives=tuple(
                        (alt["token"], alt["logprob"])
                        for alt in entry.get("top_logprobs", [])
                    ),
                )
                for entry in lp_content
            )
        usage = body.get("usage") or {}
        return GenerationResult(
            text=text,
            token_logprobs=token_logprobs,
            usage={
                k: usage.get(k, 0) for k in ("prompt_tokens", "completion_tokens")
            },
            model_fingerprint=body.get("system_fingerprint"),
        )


class Gateway:
    """Routes requests to providers with retries and bounded concurrency.

    Safe for concurrent use. ``max_in_flight`` caps the number of requests
    simultaneously outstanding per batch call.
    """

    def __init__(
        self,
        max_in_flight: int = 4,
        max_attempts: int = 5,
        backoff_base: float = 0.5,
        backoff_factor: float = 2.0,
        backoff_jitter: float = 0.2,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        http_timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be >= 1")
        self.max_in_flight = max_in_flight
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self.backoff_jitter = backoff_jitter
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._rng_lock = threading.Lock()
        self._mock = MockProvider()
        self._scripted = ScriptedProvider()
        self._openai = OpenAICompatibleProvider(timeout=http_timeout, transport=transport)

    def close(self):
        self._openai.close()

    def _provider_for(self, model: ModelSpec):
        return {
            "mock": self._mock,
            "scripted": self._scripted,
            "openai_compatible": self._openai,
        }[model.provider]

    def generate(self, model: ModelSpec, request: GenerationRequest) -> GenerationResult:
        """Generate one completion, retrying transient failures with backoff."""
        provider = self._provider_for(model)
        last: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                return provider.generate(model, request)
            except TransientProviderError as exc:
                last = exc
                if attempt == self.max_attempts:
                    break
                delay = self.backoff_base * self.backoff_factor ** (attempt - 1)
                with self._rng_lock:
                    delay *= 1 + self._rng.uniform(
                        -self.backoff_jitter, self.backoff_jitter
                    )
                logger.warning(
                    "transient failure from %s (attempt %d/%d), retrying in %.2fs: %s",
                    model.model_name, attempt, self.max_attempts, delay, exc,
                )
                self._sleep(delay)
        raise RetriesExhaustedError(self.max_attempts, last)

    def iter_batch(
        self, model: ModelSpec, requests: list[GenerationRequest]
    ) -> Iterator[tuple[int, GenerationResult | ProviderError]]:
        """Yield (index, result-or-error) in input order as results complete.

        Per-item ProviderErrors are yielded in place; anything else aborts the
        batch and propagates. At most max_in_flight requests run concurrently.
        """
        executor = ThreadPoolExecutor(max_workers=self.max_in_flight)
        futures = [executor.submit(self.generate, model, r) for r in requests]
        try:
            for i, fut in enumerate(futures):
                try:
                    yield i, fut.result()
                except ProviderError as exc:
                    yield i, exc
        finally:
            executor.shutdown(wait=False, cancel_futures=True)

    def generate_batch(
        self, model: ModelSpec, requests: list[GenerationRequest]
    ) -> list[GenerationResult | ProviderError]:
        """Run a batch; results align positionally, item failures isolated."""
        if not requests:
            raise ConfigurationError("generate_batch requires a nonempty list")
        out: list[GenerationResult | ProviderError] = [None] * len(requests)  # type: ignore[list-item]
        for i, result in self.iter_batch(model, requests):
            out[i] = result
        return out
