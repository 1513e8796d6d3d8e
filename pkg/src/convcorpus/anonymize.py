"""Sensitive-span detection and rewriting.

Detection runs regex and dictionary detectors over plain text and resolves
overlaps deterministically (longer span first, then earlier start, then
info-type name).  Rewriting supports two actions per info type:

* mask  — replace the span with ``<INFO_TYPE_k>``, where k numbers distinct
  surface forms per info type in first-occurrence order, starting at 1.
* noise — replace the span with a pool element chosen by
  hash(seed, surface) mod pool size; the same surface always maps to the
  same element within a document and never to itself.

Numbering and replacement choices are document-local, so documents can be
anonymized in parallel with no shared state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import PolicyError, PoolExhaustedError
from .hashing import stable_hash64
from .transcripts import Transcript, Turn

ACTIONS = ("mask", "noise")
DETECTORS = ("regex", "dictionary")

_NAME_RE = re.compile(r"[A-Z][A-Z0-9_]*")

# Shipped default replacement pool for noised person names.
NEUTRAL_NAMES = (
    "Alex", "Avery", "Casey", "Drew", "Emery", "Harper", "Jordan",
    "Morgan", "Quinn", "Riley", "Rowan", "Sage", "Skyler", "Taylor",
)


@dataclass(frozen=True)
class InfoType:
    """One detectable category of sensitive text."""

    name: str
    detector: str  # "regex" | "dictionary"
    pattern: str | None = None
    terms: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not _NAME_RE.fullmatch(self.name):
            raise PolicyError(
                f"info type name {self.name!r} must be UPPERCASE_WITH_UNDERSCORES"
            )
        if self.detector not in DETECTORS:
            raise PolicyError(f"info type {self.name}: unknown detector {self.detector!r}")
        if self.detector == "regex" and not self.pattern:
            raise PolicyError(f"info type {self.name}: regex detector requires a pattern")
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True, slots=True)
class DetectionSpan:
    start: int
    end: int
    info_type: str
    surface: str

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


class AnonymizationPolicy:
    """Detector set plus per-info-type action, pools, and seed.

    Patterns are compiled at load time; an invalid pattern fails here,
    never during detection.
    """

    def __init__(
        self,
        info_types: list[InfoType],
        actions: dict[str, str],
        replacement_pools: dict[str, list[str]] | None = None,
        seed: int = 0,
    ):
        self.info_types = tuple(info_types)
        self.actions = dict(actions)
        self.replacement_pools = {
            k: list(v) for k, v in (replacement_pools or {}).items()
        }
        self.seed = seed

        names = [it.name for it in self.info_types]
        if len(set(names)) != len(names):
            raise PolicyError("info type names must be unique within a policy")
        for name, action in self.actions.items():
            if action not in ACTIONS:
                raise PolicyError(f"info type {name}: unknown action {action!r}")
        for it in self.info_types:
            action = self.actions.get(it.name)
            if action is None:
                raise PolicyError(f"info type {it.name}: no action configured")
            if action == "noise" and not self.replacement_pools.get(it.name):
                raise PolicyError(f"info type {it.name}: action 'noise' requires a nonempty pool")

        self._compiled: dict[str, re.Pattern] = {}
        for it in self.info_types:
            if it.detector == "regex":
                try:
                    self._compiled[it.name] = re.compile(it.pattern)
                except re.error as exc:
                    raise PolicyError(
                        f"info type {it.name}: invalid pattern: {exc}"
                    ) from exc
            else:
                terms = [t for t in it.terms if t]
                if terms:
                    # Longest term first so the alternation prefers the
                    # longest match at a given start.
                    alternation = "|".join(
                        re.escape(t) for t in sorted(terms, key=len, reverse=True)
                    )
                    self._compiled[it.name] = re.compile(
                        r"(?<!\w)(?:" + alternation + r")(?!\w)"
                    )

    def action_for(self, info_type: str) -> str:
        return self.actions[info_type]

    @classmethod
    def from_dict(cls, raw: dict) -> "AnonymizationPolicy":
        if not isinstance(raw, dict):
            raise PolicyError("policy must be a mapping")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise PolicyError("policy seed must be an integer")
        entries = raw.get("info_types")
        if not isinstance(entries, list) or not entries:
            raise PolicyError("policy must list at least one info type")
        info_types: list[InfoType] = []
        actions: dict[str, str] = {}
        pools: dict[str, list[str]] = {}
        for entry in entries:
            if not isinstance(entry, dict) or "name" not in entry:
                raise PolicyError("each info type entry must be a mapping with a name")
            info_types.append(
                InfoType(
                    name=entry["name"],
                    detector=entry.get("detector", "regex"),
                    pattern=entry.get("pattern"),
                    terms=tuple(entry.get("terms", ())),
                )
            )
            actions[entry["name"]] = entry.get("action", "mask")
            if "pool" in entry:
                pools[entry["name"]] = list(entry["pool"])
        return cls(info_types, actions, pools, seed)

    @classmethod
    def from_file(cls, path: str | Path) -> "AnonymizationPolicy":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise PolicyError(f"cannot parse policy file {path}: {exc}") from exc
        return cls.from_dict(raw)


def default_policy(seed: int = 0) -> AnonymizationPolicy:
    """Best-effort stand-in detectors: phones and emails by regex, names and
    organizations by (initially empty) dictionaries the caller extends."""
    info_types = [
        InfoType(
            name="PHONE_NUMBER",
            detector="regex",
            pattern=r"(?<!\d)(?:\+?\d{1,2}[-. ])?\(?\d{3}\)?[-. ]\d{3}[-. ]\d{4}(?!\d)",
        ),
        InfoType(
            name="EMAIL",
            detector="regex",
            pattern=r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}",
        ),
        InfoType(name="PERSON_NAME", detector="dictionary", terms=()),
        InfoType(name="ORG_NAME", detector="dictionary", terms=()),
    ]
    actions = {
        "PHONE_NUMBER": "mask",
        "EMAIL": "mask",
        "PERSON_NAME": "noise",
        "ORG_NAME": "mask",
    }
    pools = {"PERSON_NAME": list(NEUTRAL_NAMES)}
    return AnonymizationPolicy(info_types, actions, pools, seed)


def detect(text: str, policy: AnonymizationPolicy) -> list[DetectionSpan]:
    """Find sensitive spans; returns non-overlapping spans sorted by start.

    Overlaps are resolved by preferring the longer span, then the earlier
    start, then the lexicographically smaller info-type name.
    """
    candidates: list[DetectionSpan] = []
    for it in policy.info_types:
        pattern = policy._compiled.get(it.name)
        if pattern is None:  # dictionary with no terms
            continue
        for m in pattern.finditer(text):
            if m.start() == m.end():
                continue
            candidates.append(
                DetectionSpan(m.start(), m.end(), it.name, m.group(0))
            )
    candidates.sort(key=lambda s: (-s.length, s.start, s.info_type))
    accepted: list[DetectionSpan] = []
    occupied: list[tuple[int, int]] = []
    for span in candidates:
        if any(span.start < e and span.end > s for s, e in occupied):
            continue
        accepted.append(span)
        occupied.append((span.start, span.end))
    accepted.sort(key=lambda s: s.start)
    return accepted


def _check_spans(text: str, spans: list[DetectionSpan]) -> None:
    prev_end = 0
    for span in spans:
        if span.start < prev_end:
            raise ValueError("spans must be sorted and non-overlapping")
        if span.end > len(text) or text[span.start : span.end] != span.surface:
            raise ValueError(f"span {span} does not match the text")
        prev_end = span.end


def choose_replacement(seed: int, surface: str, pool: list[str]) -> str:
    """Pool element at hash(seed, surface) mod len(pool), skipping the
    surface itself; raises PoolExhaustedError if nothing else is in the pool."""
    if not pool:
        raise PolicyError("replacement pool is empty")
    idx = stable_hash64(seed, surface) % len(pool)
    for _ in range(len(pool)):
        if pool[idx] != surface:
            return pool[idx]
        idx = (idx + 1) % len(pool)
    raise PoolExhaustedError(
        f"pool for surface {surface!r} contains only the surface itself"
    )


class DocumentAnonymizer:
    """Stateful per-document rewriter.

    Mask numbering and noise replacements stay consistent across every text
    field of one document (e.g. all turns of a transcript).  Create one per
    document; instances are not shared.
    """

    def __init__(self, policy: AnonymizationPolicy):
        self.policy = policy
        self._mask_counters: dict[str, int] = {}
        self._mask_mapping: dict[str, dict[str, str]] = {}
        self._noise_mapping: dict[str, dict[str, str]] = {}
        self.replaced_counts: dict[str, int] = {}

    def _mask_token(self, span: DetectionSpan) -> str:
        by_type = self._mask_mapping.setdefault(span.info_type, {})
        token = by_type.get(span.surface)
        if token is None:
            k = self._mask_counters.get(span.info_type, 0) + 1
            self._mask_counters[span.info_type] = k
            token = f"<{span.info_type}_{k}>"
            by_type[span.surface] = token
        return token

    def _noise_replacement(self, span: DetectionSpan) -> str:
        by_type = self._noise_mapping.setdefault(span.info_type, {})
        replacement = by_type.get(span.surface)
        if replacement is None:
            pool = self.policy.replacement_pools.get(span.info_type)
            if not pool:
                raise PolicyError(
                    f"info type {span.info_type}: noise action without a pool"
                )
            replacement = choose_replacement(self.policy.seed, span.surface, pool)
            by_type[span.surface] = replacement
        return replacement

    def _splice(self, text: str, spans: list[DetectionSpan]) -> str:
        pieces: list[str] = []
        cursor = 0
        for span in spans:
            action = self.policy.action_for(span.info_type)
            replacement = (
                self._mask_token(span) if action == "mask" else self._noise_replacement(span)
            )
            pieces.append(text[cursor : span.start])
            pieces.append(replacement)
            cursor = span.end
            self.replaced_counts[span.info_type] = (
                self.replaced_counts.get(span.info_type, 0) + 1
            )
        pieces.append(text[cursor:])
        return "".join(pieces)

    def rewrite(self, text: str) -> str:
        return self._splice(text, detect(text, self.policy))

    @property
    def mask_mapping(self) -> dict[str, dict[str, str]]:
        return self._mask_mapping

    @property
    def noise_mapping(self) -> dict[str, dict[str, str]]:
        return self._noise_mapping


def mask_spans(
    text: str, spans: list[DetectionSpan]
) -> tuple[str, dict[str, dict[str, str]]]:
    """Replace every span with its typed placeholder token.

    Returns the rewritten text and, per info type, the surface -> token
    mapping.  Spans must be sorted and non-overlapping.
    """
    _check_spans(text, spans)
    names = {s.info_type for s in spans}
    policy = AnonymizationPolicy(
        [InfoType(name=n, detector="dictionary") for n in names],
        {n: "mask" for n in names},
    )
    rewriter = DocumentAnonymizer(policy)
    rewritten = rewriter._splice(text, spans)
    return rewritten, rewriter.mask_mapping


def noise_spans(
    text: str, spans: list[DetectionSpan], policy: AnonymizationPolicy
) -> tuple[str, dict[str, dict[str, str]]]:
    """Replace every span with its pool surrogate under the policy seed.

    Every span's info type must carry the noise action with a nonempty pool.
    """
    _check_spans(text, spans)
    for span in spans:
        if policy.actions.get(span.info_type) != "noise":
            raise PolicyError(
                f"info type {span.info_type} is not configured for noising"
            )
        if not policy.replacement_pools.get(span.info_type):
            raise PolicyError(f"info type {span.info_type}: empty replacement pool")
    rewriter = DocumentAnonymizer(policy)
    rewritten = rewriter._splice(text, spans)
    return rewritten, rewriter.noise_mapping


@dataclass
class AnonymizationResult:
    text: str
    replaced_counts: dict[str, int] = field(default_factory=dict)


def anonymize_text(text: str, policy: AnonymizationPolicy) -> AnonymizationResult:
    """Detect and rewrite one standalone text under the policy."""
    rewriter = DocumentAnonymizer(policy)
    rewritten = rewriter.rewrite(text)
    return AnonymizationResult(text=rewritten, replaced_counts=rewriter.replaced_counts)


def anonymize_transcript(
    t: Transcript, policy: AnonymizationPolicy
) -> tuple[Transcript, dict[str, int]]:
    """Rewrite every turn of a transcript with shared per-document state,
    so the same surface gets the same token or surrogate across turns."""
    rewriter = DocumentAnonymizer(policy)
    turns = tuple(
        Turn(speaker_id=turn.speaker_id, start_ms=turn.start_ms, text=rewriter.rewrite(turn.text))
        for turn in t.turns
    )
    rewritten = Transcript(
        id=t.id,
        org_id=t.org_id,
        language=t.language,
        duration_s=t.duration_s,
        turns=turns,
    )
    return rewritten, rewriter.replaced_counts
