"""Token-type-entropy scoring and bounded-memory top-N selection.

The score for a document is the Shannon entropy of its empirical
distribution over distinct token types, in nats:

    H = -sum_t p(t) * ln p(t),   p(t) = count(t) / total

A single-type document scores 0; k uniformly-frequent types score ln k.
Selection keeps the N highest-entropy records with ties broken by
ascending id, using a heap of size N so memory stays O(N) no matter how
long the score stream is.
"""

from __future__ import annotations

import heapq
import json
import math
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass

from .errors import EmptyDocumentError, SchemaViolationError
from .tokenization import Tokenizer


@dataclass(frozen=True, slots=True)
class SelectionRecord:
    """A transcript id paired with its entropy score."""

    id: str
    entropy_nats: float
    token_count: int


def token_type_entropy(text: str, tokenizer: Tokenizer) -> float:
    """Shannon entropy in nats of the document's token-type distribution.

    Raises EmptyDocumentError when the text tokenizes to zero tokens; such
    records are excluded from scoring and reported, never silently scored.
    """
    counts = Counter(tokenizer.tokenize(text))
    total = sum(counts.values())
    if total == 0:
        raise EmptyDocumentError("document has no tokens; entropy is undefined")
    h = 0.0
    for c in counts.values():
        p = c / total
        h -= p * math.log(p)
    return h


class _WorstFirst:
    """Heap entry ordered so the heap root is the current worst record.

    Worse means lower entropy, or equal entropy with a later id (ids break
    ties in favor of the smaller id, keeping reruns byte-identical).
    """

    __slots__ = ("record",)

    def __init__(self, record: SelectionRecord):
        self.record = record

    def __lt__(self, other: "_WorstFirst") -> bool:
        a, b = self.record, other.record
        if a.entropy_nats != b.entropy_nats:
            return a.entropy_nats < b.entropy_nats
        return a.id > b.id


def select_top_n(records: Iterable[SelectionRecord], n: int) -> list[SelectionRecord]:
    """Return the n highest-entropy records, descending, ties by ascending id.

    Works on an arbitrarily long stream with O(n) memory.  Because the
    result is a pure function of the record set, sharding the stream across
    workers and re-selecting over the merged survivors yields the same set.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    heap: list[_WorstFirst] = []
    for record in records:
        entry = _WorstFirst(record)
        if len(heap) < n:
            heapq.heappush(heap, entry)
        elif heap[0] < entry:
            heapq.heapreplace(heap, entry)
    result = [e.record for e in heap]
    result.sort(key=lambda r: (-r.entropy_nats, r.id))
    return result


def selection_to_json(record: SelectionRecord) -> str:
    return json.dumps(
        {"id": record.id, "entropy_nats": record.entropy_nats, "token_count": record.token_count},
        ensure_ascii=False,
        separators=(",", ":"),
    )


def selection_from_json(line: str) -> SelectionRecord:
    try:
        obj = json.loads(line)
        return SelectionRecord(
            id=obj["id"],
            entropy_nats=float(obj["entropy_nats"]),
            token_count=int(obj["token_count"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SchemaViolationError(f"bad selection record: {exc}") from exc
