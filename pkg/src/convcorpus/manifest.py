"""Stage manifests: counts, checksums, and config provenance.

Every stage writes a manifest next to its output.  The manifest carries
the hash of the resolved run configuration, which downstream stages check
before consuming the output — mixing artifacts from different runs is
rejected instead of silently blended.  Manifests contain no timestamps or
absolute paths, so reruns with the same config are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestMismatchError
from .jsonio import read_json, write_json
from .packing import ShardInfo


def config_hash(raw_config: dict) -> str:
    """Digest of the canonical JSON form of a resolved configuration."""
    payload = json.dumps(raw_config, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class Manifest:
    stage: str
    config_hash: str
    seed: int
    records: int = 0
    tokens: int = 0
    windows: int | None = None
    truncated_tokens: int = 0
    component_documents: dict[str, int] = field(default_factory=dict)
    component_tokens: dict[str, int] = field(default_factory=dict)
    achieved_ratio: dict[str, float] = field(default_factory=dict)
    underflow_components: list[str] = field(default_factory=list)
    shards: list[ShardInfo] = field(default_factory=list)
    content_checksum: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "records": self.records,
            "tokens": self.tokens,
            "windows": self.windows,
            "truncated_tokens": self.truncated_tokens,
            "component_documents": self.component_documents,
            "component_tokens": self.component_tokens,
            "achieved_ratio": self.achieved_ratio,
            "underflow_components": self.underflow_components,
            "shards": [s.to_dict() for s in self.shards],
            "content_checksum": self.content_checksum,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Manifest":
        shards = [ShardInfo(**s) for s in raw.get("shards", [])]
        return cls(
            stage=raw["stage"],
            config_hash=raw["config_hash"],
            seed=raw["seed"],
            records=raw.get("records", 0),
            tokens=raw.get("tokens", 0),
            windows=raw.get("windows"),
            truncated_tokens=raw.get("truncated_tokens", 0),
            component_documents=raw.get("component_documents", {}),
            component_tokens=raw.get("component_tokens", {}),
            achieved_ratio=raw.get("achieved_ratio", {}),
            underflow_components=raw.get("underflow_components", []),
            shards=shards,
            content_checksum=raw.get("content_checksum", ""),
            extra=raw.get("extra", {}),
        )

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        return cls.from_dict(read_json(path))


def manifest_path_for(output: str | Path) -> Path:
    """Manifest location for an output file or directory."""
    output = Path(output)
    if output.suffix == ".jsonl":
        return output.with_name(output.name + ".manifest.json")
    return output / "manifest.json"


def check_provenance(manifest: Manifest, expected_config_hash: str, where: str) -> None:
    """Reject inputs produced under a different configuration."""
    if manifest.config_hash != expected_config_hash:
        raise ManifestMismatchError(
            f"{where}: input was produced under config {manifest.config_hash[:12]}..., "
            f"this run is {expected_config_hash[:12]}..."
        )
