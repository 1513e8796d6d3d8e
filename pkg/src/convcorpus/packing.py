"""Fixed-length context window packing and deterministic shard writing.

Packing is greedy and sequential: documents are laid into windows of at
most L tokens with exactly one separator slot between consecutive
documents.  A document that does not fit the remaining space is split
across consecutive windows, so no token is ever dropped and

    sum(window token counts) == sum(document token counts) + (doc count - 1)

The final partial window is emitted unpadded.  Separators are counted,
not materialized; shards carry the real tokens plus per-document spans so
any document's token sequence can be reassembled exactly.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestMismatchError, SchemaViolationError
from .jsonio import sha256_file
from .tokenization import Tokenizer
from .transcripts import Document


@dataclass(frozen=True, slots=True)
class DocSegment:
    """A contiguous slice of one document's token sequence inside a window."""

    doc_id: str
    doc_start: int  # offset into the document's token sequence
    tokens: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class PackedWindow:
    window_index: int
    token_count: int  # segment tokens plus separator slots
    separators: int
    segments: tuple[DocSegment, ...]


def pack_windows(
    docs: Iterable[Document], context_length: int, tokenizer: Tokenizer
) -> Iterator[PackedWindow]:
    """Pack documents into windows of at most context_length tokens."""
    if context_length < 2:
        raise ValueError(f"context_length must be >= 2, got {context_length}")

    window_index = 0
    segments: list[DocSegment] = []
    used = 0
    separators = 0
    pending_separator = False

    def flush() -> PackedWindow:
        nonlocal window_index, segments, used, separators
        window = PackedWindow(
            window_index=window_index,
            token_count=used,
            separators=separators,
            segments=tuple(segments),
        )
        window_index += 1
        segments = []
        used = 0
        separators = 0
        return window

    for doc in docs:
        tokens = tokenizer.tokenize(doc.text)
        if pending_separator:
            separators += 1
            used += 1
            if used == context_length:
                yield flush()
            pending_separator = False
        pos = 0
        while pos < len(tokens):
            space = context_length - used
            take = min(space, len(tokens) - pos)
            segments.append(DocSegment(doc.doc_id, pos, tuple(tokens[pos : pos + take])))
            used += take
            pos += take
            if used == context_length:
                yield flush()
        pending_separator = True
    if used > 0:
        yield flush()


def window_to_json(window: PackedWindow) -> str:
    return json.dumps(
        {
            "window_index": window.window_index,
            "token_count": window.token_count,
            "separators": window.separators,
            "segments": [
                {"doc_id": s.doc_id, "doc_start": s.doc_start, "tokens": list(s.tokens)}
                for s in window.segments
            ],
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


def window_from_json(line: str) -> PackedWindow:
    try:
        obj = json.loads(line)
        return PackedWindow(
            window_index=obj["window_index"],
            token_count=obj["token_count"],
            separators=obj["separators"],
            segments=tuple(
                DocSegment(s["doc_id"], s["doc_start"], tuple(s["tokens"]))
                for s in obj["segments"]
            ),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SchemaViolationError(f"bad window record: {exc}") from exc


def reassemble_documents(windows: Iterable[PackedWindow]) -> dict[str, list[str]]:
    """Rebuild every document's token sequence from window segments.

    Raises SchemaViolationError if any segment is out of order or leaves a
    gap — the verification half of the packing conservation property.
    """
    docs: dict[str, list[str]] = {}
    for window in windows:
        for segment in window.segments:
            tokens = docs.setdefault(segment.doc_id, [])
            if segment.doc_start != len(tokens):
                raise SchemaViolationError(
                    f"document {segment.doc_id!r}: segment starts at "
                    f"{segment.doc_start}, expected {len(tokens)}"
                )
            tokens.extend(segment.tokens)
    return docs


@dataclass
class ShardInfo:
    name: str
    records: int
    tokens: int
    sha256: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "records": self.records,
            "tokens": self.tokens,
            "sha256": self.sha256,
        }


def write_shards(
    items: Iterable,
    out_dir: str | Path,
    shard_size: int,
    to_json_line,
    token_count_of,
    line_token_count=None,
) -> list[ShardInfo]:
    """Write items into fixed-size shards with deterministic names.

    Re-reads every shard after writing and verifies record counts, token
    totals, and checksums; disagreement raises ManifestMismatchError rather
    than leaving a silently corrupt dataset behind.
    """
    if shard_size < 1:
        raise ValueError("shard_size must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    shards: list[ShardInfo] = []
    buffer: list[str] = []
    tokens = 0

    def flush() -> None:
        nonlocal buffer, tokens
        if not buffer:
            return
        name = f"shard-{len(shards):05d}.jsonl"
        path = out_dir / name
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for line in buffer:
                fh.write(line)
                fh.write("\n")
        tmp.replace(path)
        shards.append(
            ShardInfo(name=name, records=len(buffer), tokens=tokens, sha256=sha256_file(path))
        )
        buffer = []
        tokens = 0

    for item in items:
        buffer.append(to_json_line(item))
        tokens += token_count_of(item)
        if len(buffer) == shard_size:
            flush()
    flush()

    verify_shards(out_dir, shards, line_token_count=line_token_count)
    return shards


def verify_shards(
    out_dir: str | Path, shards: list[ShardInfo], line_token_count=None
) -> None:
    """Recount shard files against their recorded stats.

    When ``line_token_count`` is given, token totals are recounted by
    re-parsing every line, not trusted from the writer.
    """
    out_dir = Path(out_dir)
    for info in shards:
        path = out_dir / info.name
        if not path.exists():
            raise ManifestMismatchError(f"shard {info.name} is missing")
        if sha256_file(path) != info.sha256:
            raise ManifestMismatchError(f"shard {info.name}: checksum mismatch")
        records = 0
        tokens = 0
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                records += 1
                if line_token_count is not None:
                    tokens += line_token_count(line)
        if records != info.records:
            raise ManifestMismatchError(
                f"shard {info.name}: {records} records, manifest says {info.records}"
            )
        if line_token_count is not None and tokens != info.tokens:
            raise ManifestMismatchError(
                f"shard {info.name}: {tokens} tokens, manifest says {info.tokens}"
            )


def content_checksum(shards: list[ShardInfo]) -> str:
    """Order-sensitive digest over the shard set."""
    h = hashlib.sha256()
    for info in shards:
        h.update(f"{info.name} {info.sha256}\n".encode("utf-8"))
    return h.hexdigest()
