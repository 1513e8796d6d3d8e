"""Command-line interface.

Subcommands mirror the pipeline stages (filter, score, select, anonymize,
augment, mix, pack), plus eval, run, and validate.  Every stage command
works in two modes: with ``--config`` it runs the corresponding pipeline
stage against the work directory (bit-for-bit identical to what ``run``
does), or with explicit flags for ad-hoc use on arbitrary files.
Exit codes: 0 success, 2 invalid configuration, 3 stage failure,
4 I/O error.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import yaml

from .anonymize import AnonymizationPolicy, anonymize_transcript
from .augment import (
    DEFAULT_PLAN_WEIGHTS,
    PLAIN_STYLE,
    AugmentPlan,
    choose_style,
    render_text,
)
from .config import (
    PipelineConfig,
    _normalize_weight_keys,
    allocation_summary,
    build_config,
    validate_config,
)
from .entropy import (
    SelectionRecord,
    select_top_n,
    selection_from_json,
    selection_to_json,
    token_type_entropy,
)
from .errors import (
    ConfigError,
    ConvCorpusError,
    EmptyDocumentError,
    ManifestMismatchError,
    StageError,
)
from .evaluation.harness import run_judge_eval, run_rouge_eval
from .evaluation.judge import HttpJudgeClient
from .filtering import DiversityConfig, EligibilityRule, diversity_sample, rejection_reason
from .hashing import derive_seed
from .jsonio import expand_glob, iter_lines, write_json, write_lines
from .mixing import MixtureComponent, MixtureSpec
from .pipeline import STAGE_RUNNERS, StagePaths, run_mix, run_pack, run_pipeline
from .tokenization import Tokenizer
from .transcripts import (
    Document,
    parse_transcript,
    serialize_document,
    serialize_transcript,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_IO = 4


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Pipeline config file.")
@click.option("--seed", type=int, default=None, help="Override the global seed.")
@click.option("--workers", type=int, default=None, help="Override the worker count.")
@click.option("--log-level", default="INFO", show_default=True)
@click.pass_context
def cli(ctx, config_path, seed, workers, log_level):
    """Corpus curation and evaluation toolkit for conversation transcripts."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["seed"] = seed
    ctx.obj["workers"] = workers


def _load_config(ctx) -> PipelineConfig:
    path = ctx.obj.get("config_path")
    if not path:
        raise ConfigError(["--config is required for this command"])
    return validate_config(
        path, seed_override=ctx.obj.get("seed"), workers_override=ctx.obj.get("workers")
    )


def _flag_seed(ctx, default: int = 0) -> int:
    seed = ctx.obj.get("seed")
    return default if seed is None else seed


def _run_config_stage(ctx, stage: str) -> None:
    cfg = _load_config(ctx)
    paths = StagePaths(cfg.work_dir)
    paths.work_dir.mkdir(parents=True, exist_ok=True)
    runner, _ = STAGE_RUNNERS[stage]
    manifest = runner(cfg, paths)
    click.echo(f"{stage}: {manifest.records} records")


@cli.command("validate")
@click.pass_context
def validate_cmd(ctx):
    """Validate the config file and echo the resolved budget split."""
    cfg = _load_config(ctx)
    click.echo(f"config OK (hash {cfg.config_hash[:12]})")
    for line in allocation_summary(cfg):
        click.echo(line)


@cli.command("run")
@click.option("--no-resume", is_flag=True, help="Rerun every stage even if complete.")
@click.pass_context
def run_cmd(ctx, no_resume):
    """Run the full pipeline: filter, score, select, anonymize, augment, mix, pack."""
    cfg = _load_config(ctx)
    summary = run_pipeline(cfg, resume=not no_resume)
    for info in summary["stages"]:
        suffix = " (resumed)" if info.get("resumed") else ""
        click.echo(f"{info['stage']}: {info['records']} records{suffix}")


@cli.command("filter")
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None)
@click.option("--in", "in_glob", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.pass_context
def filter_cmd(ctx, rules_path, in_glob, out_path, report_path):
    """Apply eligibility rules and diversity sampling to raw transcripts."""
    if ctx.obj.get("config_path") and not (in_glob or out_path):
        _run_config_stage(ctx, "filter")
        return
    if not (in_glob and out_path):
        raise ConfigError(["filter needs --in and --out (or --config)"])
    rules_raw = {}
    if rules_path:
        with open(rules_path, "r", encoding="utf-8") as fh:
            rules_raw = yaml.safe_load(fh) or {}
    try:
        rule = EligibilityRule(
            min_duration_s=float(rules_raw.get("min_duration_s", 120.0)),
            min_speakers=int(rules_raw.get("min_speakers", 2)),
            allowed_languages=frozenset(rules_raw.get("allowed_languages", ["en"])),
        )
        diversity = DiversityConfig(
            target_pool_size=int(rules_raw.get("target_pool_size", 10**9)),
            per_org_cap=rules_raw.get("per_org_cap"),
            seed=_flag_seed(ctx, int(rules_raw.get("seed", 0))),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError([f"bad rules file: {exc}"]) from exc

    inputs = expand_glob(in_glob)
    if not inputs:
        raise ConfigError([f"no input files match {in_glob!r}"])
    rejected: dict[str, int] = {}
    eligible = []
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
        reason = rejection_reason(transcript, rule)
        if reason is not None:
            rejected[reason] = rejected.get(reason, 0) + 1
            continue
        eligible.append(transcript)
    sample = diversity_sample(eligible, diversity)
    write_lines(out_path, (serialize_transcript(t) for t in sample.selected))
    if report_path:
        write_json(
            report_path,
            {
                "input_records": total,
                "eligible": len(eligible),
                "selected": len(sample.selected),
                "shortfall": sample.shortfall,
                "rejected": rejected,
                "per_org_selected": sample.per_org_counts,
            },
        )
    click.echo(f"filter: {len(sample.selected)} of {total} records kept")


@cli.command("score")
@click.option("--tokenizer", "mode", default="word", show_default=True)
@click.option("--vocab-file", type=click.Path(exists=True), default=None)
@click.option("--in", "in_glob", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def score_cmd(ctx, mode, vocab_file, in_glob, out_path):
    """Score transcripts by token type entropy."""
    if ctx.obj.get("config_path") and not (in_glob or out_path):
        _run_config_stage(ctx, "score")
        return
    if not (in_glob and out_path):
        raise ConfigError(["score needs --in and --out (or --config)"])
    if mode == "external-vocab":
        if not vocab_file:
            raise ConfigError(["--vocab-file is required for external-vocab mode"])
        tokenizer = Tokenizer.from_vocab_file(vocab_file)
    else:
        tokenizer = Tokenizer(mode=mode)
    inputs = expand_glob(in_glob)
    if not inputs:
        raise ConfigError([f"no input files match {in_glob!r}"])
    records = []
    excluded = 0
    for _, _, line in iter_lines(inputs):
        transcript = parse_transcript(line)
        text = render_text(transcript, PLAIN_STYLE)
        try:
            entropy = token_type_entropy(text, tokenizer)
        except EmptyDocumentError:
            excluded += 1
            continue
        records.append(
            selection_to_json(
                SelectionRecord(
                    id=transcript.id, entropy_nats=entropy, token_count=tokenizer.count(text)
                )
            )
        )
    write_lines(out_path, records)
    click.echo(f"score: {len(records)} scored, {excluded} empty excluded")


@cli.command("select")
@click.option("--n", "top_n", type=int, default=None)
@click.option("--scores", "scores_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def select_cmd(ctx, top_n, scores_path, out_path):
    """Keep the N highest-entropy records."""
    if ctx.obj.get("config_path") and not (scores_path or out_path):
        _run_config_stage(ctx, "select")
        return
    if top_n is None or not (scores_path and out_path):
        raise ConfigError(["select needs --n, --scores and --out (or --config)"])
    stream = (selection_from_json(line) for _, _, line in iter_lines([scores_path]))
    top = select_top_n(stream, top_n)
    write_lines(out_path, (selection_to_json(r) for r in top))
    click.echo(f"select: kept {len(top)}")


@cli.command("anonymize")
@click.option("--policy", "policy_path", type=click.Path(exists=True), default=None)
@click.option("--in", "in_glob", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--audit", "audit_path", type=click.Path(), default=None)
@click.pass_context
def anonymize_cmd(ctx, policy_path, in_glob, out_path, audit_path):
    """Mask or noise sensitive spans in transcripts."""
    if ctx.obj.get("config_path") and not (in_glob or out_path):
        _run_config_stage(ctx, "anonymize")
        return
    if not (policy_path and in_glob and out_path):
        raise ConfigError(["anonymize needs --policy, --in and --out (or --config)"])
    policy = AnonymizationPolicy.from_file(policy_path)
    inputs = expand_glob(in_glob)
    if not inputs:
        raise ConfigError([f"no input files match {in_glob!r}"])
    totals: dict[str, int] = {}
    out_lines = []
    for _, _, line in iter_lines(inputs):
        transcript = parse_transcript(line)
        rewritten, counts = anonymize_transcript(transcript, policy)
        out_lines.append(serialize_transcript(rewritten))
        for name, count in counts.items():
            totals[name] = totals.get(name, 0) + count
    write_lines(out_path, out_lines)
    if audit_path:
        write_json(audit_path, {"replaced_counts": totals, "documents": len(out_lines)})
    click.echo(f"anonymize: {len(out_lines)} transcripts")


@cli.command("augment")
@click.option("--plan", "plan_path", type=click.Path(exists=True), default=None)
@click.option("--in", "in_glob", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--tokenizer", "mode", default="word", show_default=True)
@click.option("--source", default="in_domain", show_default=True)
@click.pass_context
def augment_cmd(ctx, plan_path, in_glob, out_path, mode, source):
    """Render transcripts to documents with diversified formats."""
    if ctx.obj.get("config_path") and not (in_glob or out_path):
        _run_config_stage(ctx, "augment")
        return
    if not (in_glob and out_path):
        raise ConfigError(["augment needs --in and --out (or --config)"])
    weights = dict(DEFAULT_PLAN_WEIGHTS)
    plan_raw = {}
    if plan_path:
        with open(plan_path, "r", encoding="utf-8") as fh:
            plan_raw = yaml.safe_load(fh) or {}
        for key, value in (plan_raw.get("style_weights") or {}).items():
            if key not in weights:
                raise ConfigError([f"unknown style field {key!r}"])
            weights[key] = _normalize_weight_keys(value, key)
    try:
        plan = AugmentPlan(
            seed=_flag_seed(ctx, int(plan_raw.get("seed", 0))),
            speaker_names=plan_raw.get("speaker_names"),
            speaker_roles=plan_raw.get("speaker_roles"),
            **weights,
        )
    except ValueError as exc:
        raise ConfigError([f"bad augment plan: {exc}"]) from exc
    tokenizer = Tokenizer(mode=mode)
    inputs = expand_glob(in_glob)
    if not inputs:
        raise ConfigError([f"no input files match {in_glob!r}"])
    out_lines = []
    for _, _, line in iter_lines(inputs):
        transcript = parse_transcript(line)
        style = choose_style(transcript.id, plan)
        text = render_text(transcript, style)
        out_lines.append(
            serialize_document(
                Document(
                    doc_id=transcript.id,
                    source=source,
                    text=text,
                    token_count=tokenizer.count(text),
                )
            )
        )
    write_lines(out_path, out_lines)
    click.echo(f"augment: {len(out_lines)} documents")


def _mini_config(ctx, raw: dict, out_dir) -> PipelineConfig:
    """A minimal config for standalone mix/pack runs (no pipeline file)."""
    base = {
        "seed": _flag_seed(ctx, int(raw.get("seed", 0))),
        "input_glob": "unused",
        "work_dir": str(out_dir),
        "mix": {
            "total_token_budget": int(raw.get("total_token_budget", 1)) or 1,
            "components": [
                {
                    "name": c.get("name", "c"),
                    "weight": c.get("weight", 1.0),
                    "path": c.get("path", ""),
                }
                for c in raw.get("components", [{"name": "all", "weight": 1.0}])
            ],
        },
        "pack": {
            "context_length": int(raw.get("context_length", 8000)),
            "shard_size": int(raw.get("shard_size", 1000)),
        },
        "score": {"tokenizer": raw.get("tokenizer", "word")},
    }
    cfg = build_config(base, check_paths=False)
    cfg.enforce_provenance = False
    return cfg


@cli.command("mix")
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def mix_cmd(ctx, spec_path, out_dir):
    """Combine components under a token budget into document shards."""
    if ctx.obj.get("config_path") and not (spec_path or out_dir):
        _run_config_stage(ctx, "mix")
        return
    if not (spec_path and out_dir):
        raise ConfigError(["mix needs --spec and --out (or --config)"])
    with open(spec_path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    try:
        spec = MixtureSpec(
            components=tuple(
                MixtureComponent(
                    name=c["name"], path=c.get("path", ""), weight=float(c["weight"])
                )
                for c in raw.get("components", [])
            ),
            total_token_budget=int(raw.get("total_token_budget", 0)),
            seed=_flag_seed(ctx, int(raw.get("seed", 0))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError([f"bad mixture spec: {exc}"]) from exc
    cfg = _mini_config(ctx, raw, out_dir)
    paths = StagePaths(Path(out_dir).parent)
    paths.mixed_dir = Path(out_dir)
    manifest = run_mix(cfg, paths, spec=spec)
    click.echo(f"mix: {manifest.records} documents, {manifest.tokens} tokens -> {out_dir}")


@cli.command("pack")
@click.option("--L", "-L", "context_length", type=int, default=None)
@click.option("--in", "in_dir", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--shard-size", type=int, default=1000, show_default=True)
@click.option("--tokenizer", "mode", default="word", show_default=True)
@click.pass_context
def pack_cmd(ctx, context_length, in_dir, out_dir, shard_size, mode):
    """Pack mixed documents into fixed-length context windows."""
    if ctx.obj.get("config_path") and not (in_dir or out_dir):
        _run_config_stage(ctx, "pack")
        return
    if not (in_dir and out_dir):
        raise ConfigError(["pack needs --in and --out (or --config)"])
    raw = {
        "context_length": context_length if context_length is not None else 8000,
        "shard_size": shard_size,
        "tokenizer": mode,
        "seed": _flag_seed(ctx, 0),
    }
    cfg = _mini_config(ctx, raw, out_dir)
    paths = StagePaths(Path(out_dir).parent)
    paths.mixed_dir = Path(in_dir)
    paths.packed_dir = Path(out_dir)
    manifest = run_pack(cfg, paths)
    click.echo(f"pack: {manifest.windows} windows (L={cfg.context_length}) -> {out_dir}")


@cli.group("eval")
def eval_group():
    """Evaluate summarization outputs."""


@eval_group.command("rouge")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
def eval_rouge_cmd(in_path, report_path):
    """Compute per-task ROUGE means over candidate/reference pairs."""
    report = run_rouge_eval(in_path, report_path)
    click.echo(f"rouge: {report['examples']} examples -> {report_path}")


@eval_group.command("judge")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--endpoint-env", default="JUDGE_ENDPOINT", show_default=True)
@click.option("--credential-env", default="JUDGE_API_KEY", show_default=True)
@click.option("--model", default="default", show_default=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--max-in-flight", type=int, default=4, show_default=True)
@click.option("--no-position-swap", is_flag=True, help="Present every pair in natural order.")
@click.pass_context
def eval_judge_cmd(
    ctx, in_path, endpoint_env, credential_env, model, report_path, max_in_flight, no_position_swap
):
    """Run the pairwise judge protocol and report win rates."""
    seed = _flag_seed(ctx, 0)
    position_swap = not no_position_swap
    if ctx.obj.get("config_path"):
        # The config's eval section supplies defaults; explicit flags win.
        settings = _load_config(ctx).eval

        def from_flag(name: str) -> bool:
            return ctx.get_parameter_source(name) == click.core.ParameterSource.COMMANDLINE

        if not from_flag("endpoint_env"):
            endpoint_env = settings.endpoint_env
        if not from_flag("credential_env"):
            credential_env = settings.credential_env
        if not from_flag("model"):
            model = settings.model
        if not from_flag("max_in_flight"):
            max_in_flight = settings.max_in_flight
        if not from_flag("no_position_swap"):
            position_swap = settings.position_swap
    client = HttpJudgeClient(
        endpoint_env=endpoint_env, credential_env=credential_env, model=model
    )
    report = run_judge_eval(
        in_path,
        report_path,
        client,
        swap_seed=derive_seed(seed, "judge-swap"),
        position_swap=position_swap,
        max_in_flight=max_in_flight,
    )
    click.echo(report["formatted"])


def main(argv=None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return EXIT_OK
    except ConfigError as exc:
        for violation in exc.violations:
            click.echo(f"config error: {violation}", err=True)
        return EXIT_CONFIG
    except (StageError, ManifestMismatchError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_STAGE
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return EXIT_IO
    except ConvCorpusError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_STAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1


if __name__ == "__main__":
    sys.exit(main())
