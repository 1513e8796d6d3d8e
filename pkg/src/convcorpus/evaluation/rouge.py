"""ROUGE-1, ROUGE-2, and ROUGE-L.

Tokens are lowercased maximal alphanumeric runs (the pipeline's shared
word tokenization); no stemming or stopword removal.  ROUGE-N uses
clipped n-gram overlap counts; ROUGE-L uses the longest common
subsequence over the full token sequences.  Empty inputs yield defined
zeros everywhere.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..tokenization import word_tokens


@dataclass(frozen=True, slots=True)
class MetricValues:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True, slots=True)
class RougeScore:
    r1: MetricValues
    r2: MetricValues
    rl: MetricValues

    def to_dict(self) -> dict:
        return {
            name: {"precision": m.precision, "recall": m.recall, "f1": m.f1}
            for name, m in (("r1", self.r1), ("r2", self.r2), ("rl", self.rl))
        }


def _prf(overlap: float, candidate_total: int, reference_total: int) -> MetricValues:
    precision = overlap / candidate_total if candidate_total else 0.0
    recall = overlap / reference_total if reference_total else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return MetricValues(precision=precision, recall=recall, f1=f1)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _rouge_n(candidate: list[str], reference: list[str], n: int) -> MetricValues:
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    return _prf(overlap, sum(cand.values()), sum(ref.values()))


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge(candidate: str, reference: str) -> RougeScore:
    """Score a candidate against a reference."""
    cand_tokens = word_tokens(candidate)
    ref_tokens = word_tokens(reference)
    lcs = _lcs_length(cand_tokens, ref_tokens)
    return RougeScore(
        r1=_rouge_n(cand_tokens, ref_tokens, 1),
        r2=_rouge_n(cand_tokens, ref_tokens, 2),
        rl=_prf(lcs, len(cand_tokens), len(ref_tokens)),
    )
