"""Token-budgeted mixing of corpus components.

Each component gets weight * budget tokens.  Documents are taken whole, in
hash(seed, component, doc_id) priority order, while they still fit the
allocation — a prefix of a seeded random permutation, i.e. uniform
sampling without replacement.  The first document that would overflow the
allocation stops the component, so a component never exceeds its share and
falls short of it by less than one maximum document length.  The chosen
documents from all components are then interleaved by a seeded
document-level shuffle.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, replace

from .errors import SchemaViolationError, StageError
from .hashing import stable_hash64
from .jsonio import expand_glob, iter_lines
from .tokenization import Tokenizer
from .transcripts import Document, parse_document

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class MixtureComponent:
    name: str
    path: str  # glob over document JSONL files
    weight: float

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("component name must be nonempty")
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError(f"component {self.name}: weight must be in [0, 1]")


@dataclass(frozen=True)
class MixtureSpec:
    components: tuple[MixtureComponent, ...]
    total_token_budget: int
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("mixture needs at least one component")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError("component names must be unique")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"component weights sum to {total}, expected 1.0")
        if self.total_token_budget < 1:
            raise ValueError("total_token_budget must be >= 1")

    def allocations(self) -> dict[str, float]:
        return {c.name: c.weight * self.total_token_budget for c in self.components}


@dataclass
class ComponentStats:
    documents: int = 0
    tokens: int = 0
    available_documents: int = 0
    available_tokens: int = 0
    underflow: bool = False


@dataclass
class MixResult:
    documents: list[Document]
    stats: dict[str, ComponentStats]

    @property
    def total_tokens(self) -> int:
        return sum(s.tokens for s in self.stats.values())

    def achieved_ratio(self) -> dict[str, float]:
        total = self.total_tokens
        if total == 0:
            return {name: 0.0 for name in self.stats}
        return {name: s.tokens / total for name, s in self.stats.items()}


def load_component_documents(
    component: MixtureComponent, tokenizer: Tokenizer
) -> list[Document]:
    """Read a component's documents, stamping source and a fresh token count."""
    paths = expand_glob(component.path)
    if not paths:
        raise StageError("mix", f"component {component.name!r}: no files match {component.path!r}")
    docs: list[Document] = []
    for path, lineno, line in iter_lines(paths):
        try:
            doc = parse_document(line, default_source=component.name)
        except SchemaViolationError as exc:
            raise StageError("mix", f"{path}:{lineno}: {exc}") from exc
        docs.append(
            replace(
                doc,
                source=component.name,
                token_count=tokenizer.count(doc.text),
            )
        )
    if not docs:
        raise StageError("mix", f"component {component.name!r} is empty")
    return docs


def select_component(
    docs: Iterable[Document], name: str, allocation: float, seed: int
) -> tuple[list[Document], ComponentStats]:
    """Take whole documents in seeded priority order while they fit."""
    ordered = sorted(
        docs, key=lambda d: (stable_hash64(seed, "mix:" + name, d.doc_id), d.doc_id)
    )
    stats = ComponentStats(
        available_documents=len(ordered),
        available_tokens=sum(d.token_count for d in ordered),
    )
    chosen: list[Document] = []
    total = 0
    exhausted = True
    for doc in ordered:
        if total >= allocation or total + doc.token_count > allocation:
            exhausted = False
            break
        chosen.append(doc)
        total += doc.token_count
    stats.documents = len(chosen)
    stats.tokens = total
    stats.underflow = exhausted and total < allocation
    return chosen, stats


def build_mixture(spec: MixtureSpec, tokenizer: Tokenizer) -> MixResult:
    """Assemble the mixture: per-component budget fill plus seeded interleave."""
    allocations = spec.allocations()
    all_chosen: list[Document] = []
    stats: dict[str, ComponentStats] = {}
    for component in spec.components:
        docs = load_component_documents(component, tokenizer)
        chosen, component_stats = select_component(
            docs, component.name, allocations[component.name], spec.seed
        )
        stats[component.name] = component_stats
        all_chosen.extend(chosen)
    all_chosen.sort(
        key=lambda d: (stable_hash64(spec.seed, "interleave", d.source, d.doc_id), d.source, d.doc_id)
    )
    return MixResult(documents=all_chosen, stats=stats)
