"""Independent reference implementations used to check the real metrics.

Everything here is deliberately brute force: explicit position loops for
n-gram counting, subsequence enumeration for LCS, the classic rank-difference
formula for rank correlation, and exhaustive permutation search for the
scheduler. No code is shared with the implementations under test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

EPSILON = 1e-9


def brute_ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    grams = []
    for i in range(len(tokens)):
        if i + n <= len(tokens):
            grams.append(tuple(tokens[i : i + n]))
    return grams


def brute_clipped_overlap(cand: list[str], ref: list[str], n: int) -> int:
    cand_grams = brute_ngrams(cand, n)
    ref_grams = brute_ngrams(ref, n)
    total = 0
    for gram in sorted(set(cand_grams)):
        in_cand = sum(1 for g in cand_grams if g == gram)
        in_ref = sum(1 for g in ref_grams if g == gram)
        total += min(in_cand, in_ref)
    return total


def brute_bleu_precision(
    cand: list[str], ref: list[str], max_n: int = 4, brevity_penalty: bool = False
) -> float:
    if not cand:
        return 0.0
    logs = []
    for n in range(1, max_n + 1):
        total = len(cand) - n + 1
        if total <= 0:
            continue
        clipped = brute_clipped_overlap(cand, ref, n)
        logs.append(math.log((clipped if clipped > 0 else EPSILON) / total))
    if not logs:
        return 0.0
    score = math.exp(sum(logs) / len(logs))
    if brevity_penalty and len(cand) < len(ref):
        score *= math.exp(1 - len(ref) / len(cand))
    return min(score, 1.0)


def brute_rouge_n(cand: list[str], ref: list[str], n: int) -> tuple[float, float, float]:
    cand_total = len(cand) - n + 1
    ref_total = len(ref) - n + 1
    if cand_total <= 0 or ref_total <= 0:
        return 0.0, 0.0, 0.0
    overlap = brute_clipped_overlap(cand, ref, n)
    p = overlap / cand_total
    r = overlap / ref_total
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def _is_subsequence(sub: list[str], seq: list[str]) -> bool:
    pos = 0
    for token in seq:
        if pos < len(sub) and sub[pos] == token:
            pos += 1
    return pos == len(sub)


def brute_lcs(a: list[str], b: list[str]) -> int:
    """Longest common subsequence by enumerating all subsequences of a."""
    best = 0
    for mask in range(1 << len(a)):
        sub = [a[i] for i in range(len(a)) if mask >> i & 1]
        if len(sub) > best and _is_subsequence(sub, b):
            best = len(sub)
    return best


def brute_rouge_l(cand: list[str], ref: list[str]) -> tuple[float, float, float]:
    if not cand or not ref:
        return 0.0, 0.0, 0.0
    lcs = brute_lcs(cand, ref)
    p = lcs / len(cand)
    r = lcs / len(ref)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def brute_ranks(values: list[float]) -> list[Fraction]:
    """Fractional (average) ranks computed by definition."""
    ranks = []
    for v in values:
        less = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        # average of ranks less+1 .. less+equal
        ranks.append(Fraction(2 * less + equal + 1, 2))
    return ranks


def brute_spearman(xs: list[float], ys: list[float]) -> float | None:
    """Pearson over brute-force average ranks, in exact rational arithmetic."""
    rx = brute_ranks(xs)
    ry = brute_ranks(ys)
    n = len(rx)
    mean_x = sum(rx, Fraction(0)) / n
    mean_y = sum(ry, Fraction(0)) / n
    var_x = sum((r - mean_x) ** 2 for r in rx)
    var_y = sum((r - mean_y) ** 2 for r in ry)
    if var_x == 0 or var_y == 0:
        return None
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(rx, ry))
    return float(cov) / math.sqrt(float(var_x) * float(var_y))


def spearman_no_ties(xs: list[float], ys: list[float]) -> float:
    """Classic 1 - 6*sum(d^2)/(n(n^2-1)); valid only without ties."""
    assert len(set(xs)) == len(xs) and len(set(ys)) == len(ys)
    rx = brute_ranks(xs)
    ry = brute_ranks(ys)
    n = len(xs)
    d2 = sum((a - b) ** 2 for a, b in zip(rx, ry))
    return float(1 - Fraction(6) * d2 / (n * (n * n - 1)))


def brute_kendall_tau_b(xs: list[float], ys: list[float]) -> float | None:
    concordant = discordant = ties_x = ties_y = 0
    n = len(xs)
    for i in range(n):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif dx * dy > 0:
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt(
        (concordant + discordant + ties_x) * (concordant + discordant + ties_y)
    )
    if denom == 0:
        return None
    return (concordant - discordant) / denom


def min_model_loads(model_sequence: list) -> int:
    """Fewest maximal runs of consecutive equal models over all orderings."""
    best = len(model_sequence)
    for perm in itertools.permutations(model_sequence):
        runs = 1
        for prev, curr in zip(perm, perm[1:]):
            runs += prev != curr
        best = min(best, runs)
    return best
