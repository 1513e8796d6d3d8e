"""File-backed pipeline stages and the end-to-end runner.

Stages communicate through files under the work directory, each guarded
by a manifest carrying the config hash.  A stage whose manifest already
matches the current config is skipped, so an interrupted run resumes from
the last completed stage and still produces byte-identical artifacts.
Per-record work (scoring, anonymization, rendering) fans out over a
process pool when ``workers > 1``; results are consumed in input order,
so worker count never changes any output byte.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from .anonymize import AnonymizationPolicy, anonymize_transcript
from .augment import PLAIN_STYLE, AugmentPlan, choose_style, render_text
from .config import PipelineConfig
from .entropy import (
    SelectionRecord,
    select_top_n,
    selection_from_json,
    selection_to_json,
    token_type_entropy,
)
from .errors import (
    ConvCorpusError,
    EmptyDocumentError,
    StageError,
)
from .filtering import diversity_sample, rejection_reason
from .jsonio import expand_glob, iter_lines, write_json, write_lines
from .manifest import Manifest, check_provenance, manifest_path_for
from .mixing import MixtureSpec, build_mixture
from .packing import (
    content_checksum,
    pack_windows,
    window_from_json,
    window_to_json,
    write_shards,
)
from .tokenization import Tokenizer
from .transcripts import (
    Document,
    Transcript,
    parse_document,
    parse_transcript,
    serialize_document,
    serialize_transcript,
)

logger = logging.getLogger(__name__)


@dataclass
class StagePaths:
    """All pipeline-internal artifact locations for one work dir."""

    work_dir: Path
    filtered: Path = field(init=False)
    filter_report: Path = field(init=False)
    scores: Path = field(init=False)
    score_report: Path = field(init=False)
    selected: Path = field(init=False)
    anonymized: Path = field(init=False)
    audit: Path = field(init=False)
    documents: Path = field(init=False)
    mixed_dir: Path = field(init=False)
    packed_dir: Path = field(init=False)
    summary: Path = field(init=False)

    def __post_init__(self) -> None:
        w = Path(self.work_dir)
        self.work_dir = w
        self.filtered = w / "filtered.jsonl"
        self.filter_report = w / "filter_report.json"
        self.scores = w / "scores.jsonl"
        self.score_report = w / "score_report.json"
        self.selected = w / "selected.jsonl"
        self.anonymized = w / "anonymized.jsonl"
        self.audit = w / "anonymize_audit.json"
        self.documents = w / "documents.jsonl"
        self.mixed_dir = w / "mixed"
        self.packed_dir = w / "packed"
        self.summary = w / "run_summary.json"


def _finish_stage(
    stage: str,
    output: Path,
    cfg: PipelineConfig,
    records: int,
    tokens: int = 0,
    **manifest_fields,
) -> Manifest:
    manifest = Manifest(
        stage=stage,
        config_hash=cfg.config_hash,
        seed=cfg.stage_seed(stage),
        records=records,
        tokens=tokens,
        **manifest_fields,
    )
    manifest.save(manifest_path_for(output))
    return manifest


def stage_is_complete(output: Path, cfg: PipelineConfig, stage: str) -> bool:
    path = manifest_path_for(output)
    if not path.exists():
        return False
    try:
        manifest = Manifest.load(path)
    except (OSError, KeyError, ValueError):
        return False
    return manifest.stage == stage and manifest.config_hash == cfg.config_hash


def _load_input_manifest(source: Path, cfg: PipelineConfig, stage: str) -> None:
    """Reject inputs written under a different config (mixed provenance)."""
    if not cfg.enforce_provenance:
        return
    path = manifest_path_for(source)
    if path.exists():
        check_provenance(Manifest.load(path), cfg.config_hash, f"{stage} input {source}")


# --- filter -----------------------------------------------------------------


def run_filter(cfg: PipelineConfig, paths: StagePaths) -> Manifest:
    inputs = expand_glob(cfg.input_glob)
    if not inputs:
        raise StageError("filter", f"no input files match {cfg.input_glob!r}")

    rejected: dict[str, int] = {}
    eligible: list[Transcript] = []
    total = 0
    for path, lineno, line in iter_lines(inputs):
        total += 1
        try:
            transcript = parse_transcript(line)
        except ConvCorpusError as exc:
            reason = type(exc).__name__
            rejected[reason] = rejected.get(reason, 0) + 1
            logger.debug("reject %s:%d: %s", path, lineno, exc)
            continue
        reason = rejection_reason(transcript, cfg.rule)
        if reason is not None:
            rejected[reason] = rejected.get(reason, 0) + 1
            continue
        eligible.append(transcript)

    sample = diversity_sample(eligible, cfg.diversity())
    if sample.shortfall:
        logger.warning(
            "filter: pool underflow, selected %d of %d requested",
            len(sample.selected),
            cfg.target_pool_size,
        )
    write_lines(paths.filtered, (serialize_transcript(t) for t in sample.selected))
    write_json(
        paths.filter_report,
        {
            "config_hash": cfg.config_hash,
            "input_records": total,
            "eligible": len(eligible),
            "selected": len(sample.selected),
            "shortfall": sample.shortfall,
            "rejected": rejected,
            "per_org_selected": sample.per_org_counts,
        },
    )
    return _finish_stage("filter", paths.filtered, cfg, records=len(sample.selected))


# --- score ------------------------------------------------------------------


def _score_one(line: str, tokenizer: Tokenizer) -> tuple[str, float, int] | tuple[str, None, None]:
    transcript = parse_transcript(line)
    text = render_text(transcript, PLAIN_STYLE)
    try:
        entropy = token_type_entropy(text, tokenizer)
    except EmptyDocumentError:
        return transcript.id, None, None
    return transcript.id, entropy, tokenizer.count(text)


def _ordered_map(fn, items, workers: int):
    if workers <= 1:
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, items, chunksize=64)


def run_score(cfg: PipelineConfig, paths: StagePaths) -> Manifest:
    _load_input_manifest(paths.filtered, cfg, "score")
    tokenizer = cfg.tokenizer()
    lines = [line for _, _, line in iter_lines([paths.filtered])]
    records: list[str] = []
    excluded = 0
    for tid, entropy, token_count in _ordered_map(
        partial(_score_one, tokenizer=tokenizer), lines, cfg.workers
    ):
        if entropy is None:
            excluded += 1
            logger.warning("score: %s has no tokens, excluded", tid)
            continue
        records.append(
            selection_to_json(SelectionRecord(id=tid, entropy_nats=entropy, token_count=token_count))
        )
    write_lines(paths.scores, records)
    write_json(
        paths.score_report,
        {"config_hash": cfg.config_hash, "scored": len(records), "excluded_empty": excluded},
    )
    return _finish_stage("score", paths.scores, cfg, records=len(records), extra={"excluded_empty": excluded})


# --- select -------------------------------------------------------------------


def run_select(cfg: PipelineConfig, paths: StagePaths) -> Manifest:
    _load_input_manifest(paths.scores, cfg, "select")
    stream = (selection_from_json(line) for _, _, line in iter_lines([paths.scores]))
    top = select_top_n(stream, cfg.select_n)
    write_lines(paths.selected, (selection_to_json(r) for r in top))
    return _finish_stage("select", paths.selected, cfg, records=len(top))


# --- anonymize ----------------------------------------------------------------


def _anonymize_one(line: str, policy: AnonymizationPolicy) -> tuple[str, dict[str, int]]:
    transcript = parse_transcript(line)
    rewritten, counts = anonymize_transcript(transcript, policy)
    return serialize_transcript(rewritten), counts


def run_anonymize(cfg: PipelineConfig, paths: StagePaths) -> Manifest:
    _load_input_manifest(paths.filtered, cfg, "anonymize")
    _load_input_manifest(paths.selected, cfg, "anonymize")
    selected_ids = {
        selection_from_json(line).id for _, _, line in iter_lines([paths.selected])
    }
    lines = [
        line
        for _, _, line in iter_lines([paths.filtered])
        if parse_transcript(line).id in selected_ids
    ]
    totals: dict[str, int] = {}
    out_lines: list[str] = []
    for serialized, counts in _ordered_map(
        partial(_anonymize_one, policy=cfg.policy), lines, cfg.workers
    ):
        out_lines.append(serialized)
        for name, count in counts.items():
            totals[name] = totals.get(name, 0) + count
    write_lines(paths.anonymized, out_lines)
    # The audit reports counts only; surfaces never leave the stage.
    write_json(
        paths.audit,
        {"config_hash": cfg.config_hash, "replaced_counts": totals, "documents": len(out_lines)},
    )
    return _finish_stage("anonymize", paths.anonymized, cfg, records=len(out_lines))


# --- augment ------------------------------------------------------------------


def _augment_one(line: str, plan: AugmentPlan, tokenizer: Tokenizer, source: str) -> str:
    transcript = parse_transcript(line)
    style = choose_style(transcript.id, plan)
    text = render_text(transcript, style)
    return serialize_document(
        Document(
            doc_id=transcript.id,
            source=source,
            text=text,
            token_count=tokenizer.count(text),
        )
    )


def run_augment(cfg: PipelineConfig, paths: StagePaths) -> Manifest:
    _load_input_manifest(paths.anonymized, cfg, "augment")
    tokenizer = cfg.tokenizer()
    # Label documents with the pipeline-wired component (the one whose path
    # the mix stage fills with this stage's output).
    source = next((c.name for c in cfg.mix_components if not c.path), "in_domain")
    lines = [line for _, _, line in iter_lines([paths.anonymized])]
    out_lines = list(
        _ordered_map(
            partial(_augment_one, plan=cfg.plan, tokenizer=tokenizer, source=source),
            lines,
            cfg.workers,
        )
    )
    write_lines(paths.documents, out_lines)
    tokens = sum(parse_document(line).token_count for line in out_lines)
    return _finish_stage("augment", paths.documents, cfg, records=len(out_lines), tokens=tokens)


# --- mix ------------------------------------------------------------------


def run_mix(cfg: PipelineConfig, paths: StagePaths, spec: MixtureSpec | None = None) -> Manifest:
    if spec is None:
        _load_input_manifest(paths.documents, cfg, "mix")
        spec = cfg.mixture_spec(in_domain_path=str(paths.documents))
    tokenizer = cfg.tokenizer()
    result = build_mixture(spec, tokenizer)
    shards = write_shards(
        result.documents,
        paths.mixed_dir,
        cfg.shard_size,
        to_json_line=serialize_document,
        token_count_of=lambda d: d.token_count,
        line_token_count=lambda line: parse_document(line).token_count,
    )
    manifest = Manifest(
        stage="mix",
        config_hash=cfg.config_hash,
        seed=spec.seed,
        records=len(result.documents),
        tokens=result.total_tokens,
        component_documents={n: s.documents for n, s in result.stats.items()},
        component_tokens={n: s.tokens for n, s in result.stats.items()},
        achieved_ratio=result.achieved_ratio(),
        underflow_components=[n for n, s in result.stats.items() if s.underflow],
        shards=shards,
        content_checksum=content_checksum(shards),
    )
    manifest.save(manifest_path_for(paths.mixed_dir))
    for name in manifest.underflow_components:
        logger.warning("mix: component %s underflowed its allocation", name)
    return manifest


# --- pack ------------------------------------------------------------------


def run_pack(cfg: PipelineConfig, paths: StagePaths) -> Manifest:
    _load_input_manifest(paths.mixed_dir, cfg, "pack")
    tokenizer = cfg.tokenizer()
    shard_files = expand_glob(paths.mixed_dir / "shard-*.jsonl")
    if not shard_files:
        raise StageError("pack", f"no mixed shards under {paths.mixed_dir}")
    docs = (parse_document(line) for _, _, line in iter_lines(shard_files))
    windows = list(pack_windows(docs, cfg.context_length, tokenizer))
    shards = write_shards(
        windows,
        paths.packed_dir,
        cfg.shard_size,
        to_json_line=window_to_json,
        token_count_of=lambda w: w.token_count,
        line_token_count=lambda line: window_from_json(line).token_count,
    )
    manifest = Manifest(
        stage="pack",
        config_hash=cfg.config_hash,
        seed=cfg.stage_seed("pack"),
        records=len(windows),
        tokens=sum(w.token_count for w in windows),
        windows=len(windows),
        truncated_tokens=0,  # documents split across windows, never truncated
        shards=shards,
        content_checksum=content_checksum(shards),
        extra={"context_length": cfg.context_length},
    )
    manifest.save(manifest_path_for(paths.packed_dir))
    return manifest


# --- runner -----------------------------------------------------------------

STAGE_RUNNERS = {
    "filter": (run_filter, lambda p: p.filtered),
    "score": (run_score, lambda p: p.scores),
    "select": (run_select, lambda p: p.selected),
    "anonymize": (run_anonymize, lambda p: p.anonymized),
    "augment": (run_augment, lambda p: p.documents),
    "mix": (run_mix, lambda p: p.mixed_dir),
    "pack": (run_pack, lambda p: p.packed_dir),
}

STAGE_ORDER = ("filter", "score", "select", "anonymize", "augment", "mix", "pack")


def run_pipeline(cfg: PipelineConfig, resume: bool = True) -> dict:
    """Execute every stage in order, skipping stages already complete
    under this config.  Returns the run summary (also written to disk)."""
    paths = StagePaths(cfg.work_dir)
    paths.work_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"config_hash": cfg.config_hash, "stages": []}
    for stage in STAGE_ORDER:
        runner, output_of = STAGE_RUNNERS[stage]
        output = output_of(paths)
        if resume and stage_is_complete(output, cfg, stage):
            logger.info("stage %s: already complete, skipping", stage)
            manifest = Manifest.load(manifest_path_for(output))
            summary["stages"].append(
                {"stage": stage, "records": manifest.records, "resumed": True}
            )
            continue
        logger.info("stage %s: running", stage)
        try:
            manifest = runner(cfg, paths)
        except ConvCorpusError:
            raise
        except Exception as exc:  # wrap unexpected failures with the stage name
            raise StageError(stage, str(exc)) from exc
        summary["stages"].append(
            {"stage": stage, "records": manifest.records, "resumed": False}
        )
    write_json(paths.summary, summary)
    return summary
