"""Format diversification for transcript rendering.

Rendering turns a transcript into plain text, one line per turn:
speaker tag, optional ``[mm:ss]`` timestamp prefix, configurable blank
lines between turns, and optional merging of consecutive same-speaker
turns.  A per-transcript style is drawn from configured weights, keyed on
hash(seed, transcript_id), so the draw is deterministic and independent
of processing order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .hashing import unit_interval
from .transcripts import Transcript, Turn

TAG_STYLES = ("speaker-index", "name", "initials", "role")
BLANK_LINE_OPTIONS = (0, 1, 2)
TIMESTAMP_OPTIONS = (False, True)
MERGE_OPTIONS = (False, True)

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RenderStyle:
    tag_style: str = "speaker-index"
    timestamps: bool = False
    blank_lines_between_turns: int = 0
    merge_consecutive: bool = False
    # Optional speaker metadata; "name"/"initials" fall back to
    # "speaker-index" for speakers without an entry.
    speaker_names: Mapping[str, str] | None = None
    speaker_roles: Mapping[str, str] | None = None

    def __post_init__(self) -> None:
        if self.tag_style not in TAG_STYLES:
            raise ValueError(f"unknown tag_style {self.tag_style!r}")
        if self.blank_lines_between_turns not in BLANK_LINE_OPTIONS:
            raise ValueError("blank_lines_between_turns must be 0, 1, or 2")


PLAIN_STYLE = RenderStyle()


def _normalized_weights(
    name: str, weights: Mapping, options: tuple
) -> tuple[tuple, ...]:
    """Validate one field's weight table and pair it with canonical options."""
    total = 0.0
    pairs = []
    seen = set()
    for option in options:
        w = float(weights.get(option, 0.0))
        if w < 0:
            raise ValueError(f"{name}: negative weight for {option!r}")
        pairs.append((option, w))
        total += w
        seen.add(option)
    unknown = set(weights) - seen
    if unknown:
        raise ValueError(f"{name}: unknown options {sorted(map(str, unknown))}")
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise ValueError(f"{name}: weights sum to {total}, expected 1.0")
    return tuple(pairs)


@dataclass(frozen=True)
class AugmentPlan:
    """Per-field style weights plus the seed that keys every draw."""

    seed: int
    tag_style: Mapping[str, float]
    timestamps: Mapping[bool, float]
    blank_lines_between_turns: Mapping[int, float]
    merge_consecutive: Mapping[bool, float]
    speaker_names: Mapping[str, str] | None = None
    speaker_roles: Mapping[str, str] | None = None

    def __post_init__(self) -> None:
        fields = {
            "tag_style": (self.tag_style, TAG_STYLES),
            "timestamps": (self.timestamps, TIMESTAMP_OPTIONS),
            "blank_lines_between_turns": (self.blank_lines_between_turns, BLANK_LINE_OPTIONS),
            "merge_consecutive": (self.merge_consecutive, MERGE_OPTIONS),
        }
        for name, (weights, options) in fields.items():
            # Plain dicts keep the plan picklable for worker processes.
            object.__setattr__(self, name, dict(_normalized_weights(name, weights, options)))


DEFAULT_PLAN_WEIGHTS = {
    "tag_style": {"speaker-index": 0.5, "role": 0.5},
    "timestamps": {False: 0.5, True: 0.5},
    "blank_lines_between_turns": {0: 0.5, 1: 0.25, 2: 0.25},
    "merge_consecutive": {False: 0.5, True: 0.5},
}


def _draw(seed: int, transcript_id: str, field: str, pairs: Mapping) -> object:
    r = unit_interval(seed, "style:" + field, transcript_id)
    cumulative = 0.0
    chosen = None
    for option, weight in pairs.items():
        if weight <= 0.0:
            continue
        cumulative += weight
        chosen = option
        if r < cumulative:
            return option
    return chosen  # float underflow at the top end lands on the last option


def choose_style(transcript_id: str, plan: AugmentPlan) -> RenderStyle:
    """Draw a RenderStyle for this transcript; same id + seed, same style."""
    return RenderStyle(
        tag_style=_draw(plan.seed, transcript_id, "tag_style", plan.tag_style),
        timestamps=_draw(plan.seed, transcript_id, "timestamps", plan.timestamps),
        blank_lines_between_turns=_draw(
            plan.seed, transcript_id, "blank_lines_between_turns", plan.blank_lines_between_turns
        ),
        merge_consecutive=_draw(
            plan.seed, transcript_id, "merge_consecutive", plan.merge_consecutive
        ),
        speaker_names=plan.speaker_names,
        speaker_roles=plan.speaker_roles,
    )


def merge_turns(t: Transcript) -> Transcript:
    """Collapse maximal runs of consecutive same-speaker turns.

    Run texts join with a single space; the run keeps its first turn's
    start_ms.  Idempotent, never increases the turn count.
    """
    merged: list[Turn] = []
    for turn in t.turns:
        if merged and merged[-1].speaker_id == turn.speaker_id:
            prev = merged[-1]
            merged[-1] = Turn(
                speaker_id=prev.speaker_id,
                start_ms=prev.start_ms,
                text=prev.text + " " + turn.text,
            )
        else:
            merged.append(turn)
    return replace(t, turns=tuple(merged))


def _initials(name: str) -> str:
    return "".join(word[0].upper() for word in name.split() if word)


def _speaker_tags(t: Transcript, style: RenderStyle) -> dict[str, str]:
    order: list[str] = []
    for turn in t.turns:
        if turn.speaker_id not in order:
            order.append(turn.speaker_id)
    index_tag = {sid: f"Speaker {i}" for i, sid in enumerate(order, start=1)}

    if style.tag_style == "speaker-index":
        return index_tag
    if style.tag_style == "role":
        roles = style.speaker_roles or {}
        # Default role assignment: first speaker is the agent.
        return {
            sid: roles.get(sid, "Agent" if i == 0 else "Customer")
            for i, sid in enumerate(order)
        }
    names = style.speaker_names or {}
    tags = {}
    for sid in order:
        name = names.get(sid)
        if not name:
            tags[sid] = index_tag[sid]
        elif style.tag_style == "name":
            tags[sid] = name
        else:
            tags[sid] = _initials(name) or index_tag[sid]
    return tags


def _timestamp(start_ms: int) -> str:
    minutes, seconds = divmod(start_ms // 1000, 60)
    return f"[{minutes:02d}:{seconds:02d}]"


def render_text(t: Transcript, style: RenderStyle) -> str:
    """Render the transcript to plain text, one line (or block) per turn.

    Every turn's text appears exactly once, in order; stripping tags and
    timestamps recovers the original utterance sequence.
    """
    working = merge_turns(t) if style.merge_consecutive else t
    tags = _speaker_tags(working, style)
    lines = []
    for turn in working.turns:
        prefix = _timestamp(turn.start_ms) + " " if style.timestamps else ""
        lines.append(f"{prefix}{tags[turn.speaker_id]}: {turn.text}")
    separator = "\n" * (1 + style.blank_lines_between_turns)
    return separator.join(lines)
