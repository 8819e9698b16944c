"""N-gram overlap metrics: clipped-precision BLEU and ROUGE-1/2/L."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .tokenizer import tokenize

EPSILON = 1e-9


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def clipped_overlap(candidate: list[str], reference: list[str], n: int) -> int:
    """Candidate n-gram counts clipped to their reference maxima, summed."""
    ref_counts = ngram_counts(reference, n)
    return sum(
        min(count, ref_counts[gram])
        for gram, count in ngram_counts(candidate, n).items()
    )


def bleu_precision(
    candidate: str,
    reference: str,
    max_n: int = 4,
    brevity_penalty: bool = False,
) -> float:
    """Geometric mean of clipped n-gram precisions for n = 1..max_n.

    Zero clipped counts are smoothed to EPSILON before division. Orders the
    candidate is too short to form contribute nothing. The brevity penalty is
    off by default, matching the precision-only naming; enable it for
    standard BLEU.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand:
        return 0.0

    log_precisions = []
    for n in range(1, max_n + 1):
        total = len(cand) - n + 1
        if total <= 0:
            continue
        clipped = clipped_overlap(cand, ref, n)
        numerator = clipped if clipped > 0 else EPSILON
        log_precisions.append(math.log(numerator / total))
    if not log_precisions:
        return 0.0

    score = math.exp(sum(log_precisions) / len(log_precisions))
    if brevity_penalty and len(cand) < len(ref):
        score *= math.exp(1 - len(ref) / len(cand))
    return min(score, 1.0)


def rouge_n(candidate: str, reference: str, n: int) -> PRF:
    """Multiset n-gram overlap: recall against the reference, precision
    against the candidate, and their harmonic mean."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    cand_total = len(cand) - n + 1
    ref_total = len(ref) - n + 1
    if cand_total <= 0 or ref_total <= 0:
        return PRF(0.0, 0.0, 0.0)
    overlap = clipped_overlap(cand, ref, n)
    precision = overlap / cand_total
    recall = overlap / ref_total
    return PRF(precision, recall, _f1(precision, recall))


def lcs_length(a: list[str], b: list[str]) -> int:
    """Longest common subsequence length, O(len(a)*len(b)) table."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> PRF:
    """LCS-based overlap over tokens."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return PRF(0.0, 0.0, 0.0)
    lcs = lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return PRF(precision, recall, _f1(precision, recall))
