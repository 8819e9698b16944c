"""Judge-based rating with probability-weighted scores.

The judge is asked for a single integer rating; the score is the expectation
of the rating under the judge's token probabilities at the rating position,
normalized to [0, 1]. When the endpoint cannot return logprobs, the score
falls back to averaging parsed ratings over repeated samples.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Any

from .. import prompts
from ..errors import MetricError
from ..model import ModelSpec, TokenLogprob
from ..providers import Gateway, GenerationRequest, SamplingParams

FALLBACK_SAMPLES = 10

_INT = re.compile(r"(\d+)")


@dataclass(frozen=True)
class JudgePromptVariant:
    """A judge prompt with {source} and {candidate} slots."""

    id: str
    text: str


BUILTIN_VARIANTS: dict[str, JudgePromptVariant] = {
    vid: JudgePromptVariant(vid, text) for vid, text in prompts.JUDGE_PROMPTS.items()
}


@dataclass(frozen=True)
class RatingDistribution:
    """Probabilities over the integer ratings of a bounded scale."""

    lo: int
    hi: int
    probs: dict[int, float]

    def __post_init__(self):
        total = sum(self.probs.values())
        if not self.probs or total <= 0:
            raise MetricError("rating distribution has no mass")
        if any(r < self.lo or r > self.hi for r in self.probs):
            raise MetricError("rating outside scale")
        object.__setattr__(
            self, "probs", {r: p / total for r, p in self.probs.items()}
        )

    def expected(self) -> float:
        return sum(r * p for r, p in self.probs.items())

    def normalized_score(self) -> float:
        return (self.expected() - self.lo) / (self.hi - self.lo)


def _parse_rating(token: str, lo: int, hi: int) -> int | None:
    m = _INT.search(token)
    if not m:
        return None
    value = int(m.group(1))
    return value if lo <= value <= hi else None


def _rating_position(
    logprobs: tuple[TokenLogprob, ...], lo: int, hi: int
) -> TokenLogprob | None:
    """Last emitted token that parses as an in-scale rating."""
    for entry in reversed(logprobs):
        if _parse_rating(entry.token, lo, hi) is not None:
            return entry
    return None


def distribution_from_logprobs(
    entry: TokenLogprob, lo: int, hi: int
) -> RatingDistribution:
    """Aggregate rating-token probabilities at one position, renormalized.

    Alternatives that parse to the same rating (e.g. "5" and " 5") pool
    their mass. The chosen token participates even if absent from the
    alternatives list.
    """
    probs: dict[int, float] = {}
    seen_tokens = set()
    candidates = list(entry.top_alternatives) + [(entry.token, entry.logprob)]
    for token, logprob in candidates:
        if token in seen_tokens:
            continue
        seen_tokens.add(token)
        rating = _parse_rating(token, lo, hi)
        if rating is not None:
            probs[rating] = probs.get(rating, 0.0) + math.exp(logprob)
    if not probs:
        raise MetricError("no valid rating tokens at the rating position")
    return RatingDistribution(lo=lo, hi=hi, probs=probs)


def g_eval(
    source: str,
    candidate: str,
    variant: JudgePromptVariant,
    judge: ModelSpec,
    gateway: Gateway,
    scale: tuple[int, int] = (1, 5),
) -> tuple[float, dict[str, Any]]:
    """Score a candidate against its source with a judge model.

    Returns the normalized score in [0, 1] plus artifacts (the rating
    distribution or the sampled ratings, and the mode used).
    """
    lo, hi = scale
    user = variant.text.replace("{source}", source).replace("{candidate}", candidate)
    sampling = SamplingParams.from_model(judge)
    request = GenerationRequest(
        user=user, sampling=sampling, want_logprobs=True, top_logprobs=20
    )
    result = gateway.generate(judge, request)

    if result.token_logprobs:
        entry = _rating_position(result.token_logprobs, lo, hi)
        if entry is None:
            raise MetricError(
                f"no parsable rating in judge output: {result.text[:120]!r}"
            )
        dist = distribution_from_logprobs(entry, lo, hi)
        artifacts = {
            "mode": "logprobs",
            "variant": variant.id,
            "distribution": {str(r): p for r, p in sorted(dist.probs.items())},
            "expected_rating": dist.expected(),
        }
        return dist.normalized_score(), artifacts

    # Fallback: sample repeatedly at temperature 1 and average parsed ratings.
    ratings = []
    sample_req = GenerationRequest(
        user=user, sampling=replace(sampling, temperature=1.0)
    )
    for _ in range(FALLBACK_SAMPLES):
        text = gateway.generate(judge, sample_req).text
        rating = _last_rating_in_text(text, lo, hi)
        if rating is not None:
            ratings.append(rating)
    if not ratings:
        raise MetricError("no parsable rating in any sampled judge output")
    mean = sum(ratings) / len(ratings)
    artifacts = {
        "mode": "samples",
        "variant": variant.id,
        "ratings": ratings,
        "expected_rating": mean,
    }
    return (mean - lo) / (hi - lo), artifacts


def _last_rating_in_text(text: str, lo: int, hi: int) -> int | None:
    ratings = [int(m) for m in _INT.findall(text) if lo <= int(m) <= hi]
    return ratings[-1] if ratings else None
