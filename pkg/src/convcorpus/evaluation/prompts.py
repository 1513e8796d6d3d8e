"""Task prompt templates and rendering.

A template body contains ``{Slot Name}`` placeholders plus one transcript
placeholder, the literal ``[Call Conversation Transcript]``.  Rendering
substitutes bound slot values verbatim and splices the transcript in, and
fails loudly on unbound or unknown slots — never emits a prompt with a
dangling placeholder.

The action-items and support-summary tasks ship built in.  The two
meeting-summarization tasks use prompt wordings owned by external
benchmarks, so their templates are supplied through config files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import yaml

from ..errors import ConfigError, MissingSlotError, UnknownSlotValueError

TRANSCRIPT_PLACEHOLDER = "[Call Conversation Transcript]"

_SLOT_RE = re.compile(r"\{([^{}]+)\}")

TASKS = ("action_items", "support_summary", "qmsum", "qmsum_i")

ACTION_ITEMS_BODY = (
    "For the conversation given below, generate a newline-separated list of "
    "work, business, or service-related TODO tasks that should be completed "
    "after the conversation. Each task is a one-sentence summary of the "
    "action to be taken.\n"
    "\n"
    "Transcript: [Call Conversation Transcript]"
)

SUPPORT_SUMMARY_BODY = (
    "Generate a {Length Type} summary of the following conversation {Format} "
    "without assessing its quality.\n"
    "\n"
    "Transcript: [Call Conversation Transcript]"
)


@dataclass(frozen=True)
class PromptTemplate:
    task: str
    body: str
    slots: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "slots",
            MappingProxyType({k: tuple(v) for k, v in dict(self.slots).items()}),
        )

    def placeholder_names(self) -> list[str]:
        return _SLOT_RE.findall(self.body)


BUILTIN_TEMPLATES: dict[str, PromptTemplate] = {
    "action_items": PromptTemplate(task="action_items", body=ACTION_ITEMS_BODY, slots={}),
    "support_summary": PromptTemplate(
        task="support_summary",
        body=SUPPORT_SUMMARY_BODY,
        slots={
            "Length Type": ("long", "medium", "short"),
            "Format": ("in bullet points", "in paragraph form"),
        },
    ),
}


def render_prompt(
    template: PromptTemplate, slots: Mapping[str, str], transcript_text: str
) -> str:
    """Fill the template with slot bindings and the transcript.

    Raises MissingSlotError when a body placeholder is unbound and
    UnknownSlotValueError for unknown slot names or disallowed values.
    """
    for name, value in slots.items():
        if name not in template.slots:
            raise UnknownSlotValueError(
                f"task {template.task!r} has no slot {name!r}"
            )
        allowed = template.slots[name]
        if allowed and value not in allowed:
            raise UnknownSlotValueError(
                f"task {template.task!r}: {value!r} is not an allowed value for "
                f"slot {name!r} (allowed: {list(allowed)})"
            )

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in slots:
            raise MissingSlotError(f"task {template.task!r}: slot {name!r} is unbound")
        return slots[name]

    rendered = _SLOT_RE.sub(substitute, template.body)
    return rendered.replace(TRANSCRIPT_PLACEHOLDER, transcript_text)


def load_templates(path: str | Path) -> dict[str, PromptTemplate]:
    """Load config-supplied templates (e.g. the meeting-summarization tasks).

    File format, YAML or JSON:

        templates:
          qmsum:
            body: "... {Query} ... [Call Conversation Transcript]"
            slots:
              Query: []        # empty list = any value allowed

    Returned mapping starts from the built-ins; file entries override.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([f"cannot parse template file {path}: {exc}"]) from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("templates"), dict):
        raise ConfigError([f"template file {path} must contain a 'templates' mapping"])
    templates = dict(BUILTIN_TEMPLATES)
    for task, entry in raw["templates"].items():
        if not isinstance(entry, dict) or "body" not in entry:
            raise ConfigError([f"template {task!r} must be a mapping with a body"])
        slots = entry.get("slots", {})
        if not isinstance(slots, dict):
            raise ConfigError([f"template {task!r}: slots must be a mapping"])
        templates[task] = PromptTemplate(
            task=task,
            body=entry["body"],
            slots={k: tuple(v or ()) for k, v in slots.items()},
        )
    return templates
