"""Conversation transcript data model and canonical serialization.

Records travel between stages as one JSON object per line:

    {"id": str, "org_id": str, "language": str, "duration_s": number,
     "turns": [{"speaker": str, "start_ms": int, "text": str}]}

Documents (rendered plain text plus bookkeeping) use:

    {"doc_id": str, "source": str, "text": str, "token_count": int}

All types are immutable after construction, so they are safe to share
or ship across worker processes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import EncodingError, MalformedRecordError, SchemaViolationError


@dataclass(frozen=True, slots=True)
class Turn:
    """One utterance: who spoke, when (ms from call start), and what."""

    speaker_id: str
    start_ms: int
    text: str

    def __post_init__(self) -> None:
        if self.start_ms < 0:
            raise SchemaViolationError(f"turn start_ms must be >= 0, got {self.start_ms}")


@dataclass(frozen=True, slots=True)
class Transcript:
    """A multi-speaker conversation with timing and organization metadata."""

    id: str
    org_id: str
    language: str
    duration_s: float
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise SchemaViolationError("transcript id must be nonempty")
        if self.duration_s < 0:
            raise SchemaViolationError(f"duration_s must be >= 0, got {self.duration_s}")
        if not self.turns:
            raise SchemaViolationError(f"transcript {self.id!r} has no turns")
        prev = 0
        for turn in self.turns:
            if turn.start_ms < prev:
                raise SchemaViolationError(
                    f"transcript {self.id!r}: turns out of time order "
                    f"({turn.start_ms} after {prev})"
                )
            prev = turn.start_ms
        # Duration below the last turn timestamp means corrupt metadata;
        # fail hard rather than clamp.
        last_s = self.turns[-1].start_ms / 1000.0
        if self.duration_s < last_s:
            raise SchemaViolationError(
                f"transcript {self.id!r}: duration_s {self.duration_s} is below "
                f"last turn timestamp {last_s}s"
            )

    @property
    def distinct_speaker_count(self) -> int:
        return len({t.speaker_id for t in self.turns})

    @property
    def empty_turn_count(self) -> int:
        """Empty-text turns are retained for provenance but flagged here."""
        return sum(1 for t in self.turns if not t.text)


@dataclass(frozen=True, slots=True)
class Document:
    """A rendered plain-text document flowing into the mixing stage.

    ``token_count`` is defined relative to the configured tokenizer and is
    recomputed wherever a tokenizer is in hand (the mix stage does this on
    ingest), so a stale count never propagates.
    """

    doc_id: str
    source: str
    text: str
    token_count: int

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise SchemaViolationError("doc_id must be nonempty")
        if self.token_count < 0:
            raise SchemaViolationError(f"token_count must be >= 0, got {self.token_count}")


def _require(record: dict, key: str, kinds: tuple[type, ...], where: str):
    if key not in record:
        raise SchemaViolationError(f"{where}: missing field {key!r}")
    value = record[key]
    # bool is an int subclass; never a valid value for these fields.
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise SchemaViolationError(f"{where}: field {key!r} has wrong type {type(value).__name__}")
    return value


def parse_transcript(line: str | bytes) -> Transcript:
    """Parse one input record into a validated Transcript.

    Raises EncodingError for invalid UTF-8 bytes, MalformedRecordError for
    unparseable JSON, and SchemaViolationError for anything that parses but
    breaks the schema or a transcript invariant.
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(f"record is not valid UTF-8: {exc}") from exc
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"record is not valid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise SchemaViolationError("record is not a JSON object")

    tid = _require(record, "id", (str,), "record")
    where = f"transcript {tid!r}"
    org_id = _require(record, "org_id", (str,), where)
    language = _require(record, "language", (str,), where)
    duration_s = float(_require(record, "duration_s", (int, float), where))
    raw_turns = _require(record, "turns", (list,), where)

    turns = []
    for i, raw in enumerate(raw_turns):
        if not isinstance(raw, dict):
            raise SchemaViolationError(f"{where}: turn {i} is not an object")
        turn_where = f"{where} turn {i}"
        turns.append(
            Turn(
                speaker_id=_require(raw, "speaker", (str,), turn_where),
                start_ms=_require(raw, "start_ms", (int,), turn_where),
                text=_require(raw, "text", (str,), turn_where),
            )
        )
    return Transcript(
        id=tid, org_id=org_id, language=language, duration_s=duration_s, turns=tuple(turns)
    )


def serialize_transcript(t: Transcript) -> str:
    """Serialize to the canonical one-line form.

    Field order and separators are fixed, so serialize(parse(x)) round-trips
    byte-identically after the first pass.
    """
    record = {
        "id": t.id,
        "org_id": t.org_id,
        "language": t.language,
        "duration_s": t.duration_s,
        "turns": [
            {"speaker": turn.speaker_id, "start_ms": turn.start_ms, "text": turn.text}
            for turn in t.turns
        ],
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def parse_document(line: str | bytes, default_source: str = "") -> Document:
    """Parse one document record.

    ``source`` and ``token_count`` may be absent in external inputs (e.g.
    replay corpora); the mix stage overrides both on ingest anyway.
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(f"record is not valid UTF-8: {exc}") from exc
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"record is not valid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise SchemaViolationError("record is not a JSON object")
    doc_id = _require(record, "doc_id", (str,), "document")
    where = f"document {doc_id!r}"
    text = _require(record, "text", (str,), where)
    source = record.get("source", default_source)
    if not isinstance(source, str):
        raise SchemaViolationError(f"{where}: field 'source' has wrong type")
    token_count = record.get("token_count", 0)
    if isinstance(token_count, bool) or not isinstance(token_count, int):
        raise SchemaViolationError(f"{where}: field 'token_count' has wrong type")
    return Document(doc_id=doc_id, source=source, text=text, token_count=token_count)


def serialize_document(d: Document) -> str:
    record = {
        "doc_id": d.doc_id,
        "source": d.source,
        "text": d.text,
        "token_count": d.token_count,
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))
