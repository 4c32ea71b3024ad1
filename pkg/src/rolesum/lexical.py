"""Token-overlap metrics: ROUGE-1/2/L and the length-proximity reward.

All scores are computed from integer match counts and converted to floats by a
single division, so equal counts give bit-identical scores regardless of how
the counts were obtained.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

ROUGE_VARIANTS = ("rouge1", "rouge2", "rougeL")


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, matches: int, candidate_total: int, reference_total: int) -> RougeScore:
        precision = matches / candidate_total if candidate_total else 0.0
        recall = matches / reference_total if reference_total else 0.0
        denom = candidate_total + reference_total
        # algebraically 2PR/(P+R); the count form avoids intermediate rounding
        f1 = 2 * matches / denom if denom else 0.0
        return cls(precision, recall, f1)


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """ROUGE-N with clipped counts: each reference n-gram credits at most as
    many matches as it occurs in the reference."""
    cand = ngram_counts(candidate, n)
    ref = ngram_counts(reference, n)
    matches = sum(min(count, ref[gram]) for gram, count in cand.items())
    return RougeScore.from_counts(matches, sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence, O(len(a)*len(b)) rolling-row DP."""
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


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    matches = lcs_length(candidate, reference)
    return RougeScore.from_counts(matches, len(candidate), len(reference))


def rouge_all(candidate: Sequence[str], reference: Sequence[str]) -> dict[str, RougeScore]:
    return {
        "rouge1": rouge_n(candidate, reference, 1),
        "rouge2": rouge_n(candidate, reference, 2),
        "rougeL": rouge_l(candidate, reference),
    }


def rouge_reward(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Unweighted mean of the ROUGE-1, ROUGE-2, and ROUGE-L F1 scores."""
    scores = rouge_all(candidate, reference)
    return (scores["rouge1"].f1 + scores["rouge2"].f1 + scores["rougeL"].f1) / 3.0


def length_reward(candidate_len: int, reference_len: int) -> float:
    """1 at matching lengths, decaying linearly in relative deviation and
    clamped at 0 (reached at 2x or 0x the reference length)."""
    if reference_len <= 0:
        raise ValueError("reference token count must be positive")
    if candidate_len < 0:
        raise ValueError("candidate token count must be non-negative")
    return max(0.0, 1.0 - abs(candidate_len - reference_len) / reference_len)
