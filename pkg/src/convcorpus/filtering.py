"""Eligibility filtering and organization-diversity sampling.

Eligibility is pointwise: a transcript passes iff its duration, distinct
speaker count, and language each clear the configured thresholds
(boundaries inclusive).  Diversity sampling caps how many transcripts any
one organization contributes and trims the pool to a target size.  Every
keep/drop decision is keyed on hash(seed, id), so the selected id set is
independent of input order, sharding, and worker count.
"""

from __future__ import annotations

import heapq
from collections.abc import Iterable
from dataclasses import dataclass, field

from .hashing import stable_hash64
from .transcripts import Transcript

REJECT_DURATION = "duration"
REJECT_SPEAKERS = "speakers"
REJECT_LANGUAGE = "language"


@dataclass(frozen=True)
class EligibilityRule:
    min_duration_s: float = 120.0
    min_speakers: int = 2
    allowed_languages: frozenset[str] = frozenset({"en"})

    def __post_init__(self) -> None:
        if self.min_duration_s < 0:
            raise ValueError("min_duration_s must be >= 0")
        if self.min_speakers < 1:
            raise ValueError("min_speakers must be >= 1")
        if not self.allowed_languages:
            raise ValueError("allowed_languages must be nonempty")
        # Tolerate lists/sets from config loaders.
        object.__setattr__(self, "allowed_languages", frozenset(self.allowed_languages))


def rejection_reason(t: Transcript, rule: EligibilityRule) -> str | None:
    """First failing criterion (duration, speakers, language) or None if eligible."""
    if t.duration_s < rule.min_duration_s:
        return REJECT_DURATION
    if t.distinct_speaker_count < rule.min_speakers:
        return REJECT_SPEAKERS
    if t.language not in rule.allowed_languages:
        return REJECT_LANGUAGE
    return None


def is_eligible(t: Transcript, rule: EligibilityRule) -> bool:
    return rejection_reason(t, rule) is None


@dataclass(frozen=True)
class DiversityConfig:
    target_pool_size: int
    per_org_cap: int | None = None  # None = unlimited
    seed: int = 0

    def __post_init__(self) -> None:
        if self.target_pool_size < 1:
            raise ValueError("target_pool_size must be >= 1")
        if self.per_org_cap is not None and self.per_org_cap < 1:
            raise ValueError("per_org_cap must be >= 1 or unlimited")


@dataclass
class DiversitySample:
    """Sampling outcome: the selected transcripts plus accounting."""

    selected: list[Transcript]
    shortfall: int
    per_org_counts: dict[str, int] = field(default_factory=dict)

    @property
    def ids(self) -> set[str]:
        return {t.id for t in self.selected}


class _LargestKeyFirst:
    """Heap entry ordered by descending priority key.

    With heapq's min-heap semantics the root is then the largest key, which
    lets a fixed-size heap retain the k smallest keys.
    """

    __slots__ = ("key", "transcript")

    def __init__(self, key: tuple[int, str], transcript: Transcript):
        self.key = key
        self.transcript = transcript

    def __lt__(self, other: "_LargestKeyFirst") -> bool:
        return self.key > other.key


def _priority(seed: int, transcript_id: str) -> tuple[int, str]:
    return (stable_hash64(seed, "diversity", transcript_id), transcript_id)


def diversity_sample(
    transcripts: Iterable[Transcript], cfg: DiversityConfig
) -> DiversitySample:
    """Select at most target_pool_size transcripts, at most per_org_cap per org.

    Within each organization the per_org_cap members with the smallest
    hash(seed, id) priorities survive; across survivors the
    target_pool_size smallest priorities win.  The result is a pure
    function of the input *set*.  When the pool is smaller than the
    target, everything is emitted and the shortfall reported.

    Output is sorted by id.  Memory is bounded by the target size plus one
    capped heap per organization.
    """
    # An org can never usefully contribute more than the target.
    cap = cfg.target_pool_size
    if cfg.per_org_cap is not None:
        cap = min(cap, cfg.per_org_cap)

    per_org: dict[str, list[_LargestKeyFirst]] = {}
    for t in transcripts:
        heap = per_org.setdefault(t.org_id, [])
        entry = _LargestKeyFirst(_priority(cfg.seed, t.id), t)
        if len(heap) < cap:
            heapq.heappush(heap, entry)
        elif entry.key < heap[0].key:
            heapq.heapreplace(heap, entry)

    survivors = [entry for heap in per_org.values() for entry in heap]
    if len(survivors) > cfg.target_pool_size:
        survivors = heapq.nsmallest(
            cfg.target_pool_size, survivors, key=lambda e: e.key
        )
    selected = sorted((e.transcript for e in survivors), key=lambda t: t.id)

    per_org_counts: dict[str, int] = {}
    for t in selected:
        per_org_counts[t.org_id] = per_org_counts.get(t.org_id, 0) + 1
    return DiversitySample(
        selected=selected,
        shortfall=max(0, cfg.target_pool_size - len(selected)),
        per_org_counts=per_org_counts,
    )
