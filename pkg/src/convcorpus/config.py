"""Pipeline configuration: loading, normalization, validation.

One YAML (or JSON) file configures every stage.  Validation collects the
complete list of violations instead of stopping at the first, and never
crashes on malformed input — fuzzing the loader yields ConfigError, not
tracebacks.  Per-stage seeds are derived from the single global seed by
hashing with the stage name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .anonymize import AnonymizationPolicy, PolicyError, default_policy
from .augment import DEFAULT_PLAN_WEIGHTS, AugmentPlan
from .errors import ConfigError
from .filtering import DiversityConfig, EligibilityRule
from .hashing import derive_seed
from .jsonio import expand_glob
from .manifest import config_hash
from .mixing import MixtureComponent, MixtureSpec
from .tokenization import MODES, Tokenizer

DEFAULT_CONTEXT_LENGTH = 8000
DEFAULT_SHARD_SIZE = 1000

STAGE_NAMES = ("filter", "score", "select", "anonymize", "augment", "mix", "pack")


@dataclass
class EvalSettings:
    templates_file: str | None = None
    endpoint_env: str = "JUDGE_ENDPOINT"
    credential_env: str = "JUDGE_API_KEY"
    model: str = "default"
    max_in_flight: int = 4
    position_swap: bool = True


@dataclass
class PipelineConfig:
    """Validated, resolved configuration for a full run."""

    seed: int
    workers: int
    input_glob: str
    work_dir: Path
    rule: EligibilityRule
    per_org_cap: int | None
    target_pool_size: int
    tokenizer_mode: str
    vocab_file: str | None
    select_n: int
    policy: AnonymizationPolicy
    plan: AugmentPlan
    mix_components: list[MixtureComponent]
    total_token_budget: int
    context_length: int
    shard_size: int
    eval: EvalSettings
    raw: dict = field(repr=False, default_factory=dict)
    config_hash: str = ""
    # Stage outputs carry the config hash; inputs with a different hash are
    # rejected.  Ad-hoc flag-driven stage runs opt out.
    enforce_provenance: bool = True

    def stage_seed(self, stage: str) -> int:
        return derive_seed(self.seed, stage)

    def tokenizer(self) -> Tokenizer:
        if self.tokenizer_mode == "external-vocab":
            return Tokenizer.from_vocab_file(self.vocab_file)
        return Tokenizer(mode=self.tokenizer_mode)

    def diversity(self) -> DiversityConfig:
        return DiversityConfig(
            target_pool_size=self.target_pool_size,
            per_org_cap=self.per_org_cap,
            seed=self.stage_seed("filter"),
        )

    def mixture_spec(self, in_domain_path: str | None = None) -> MixtureSpec:
        """MixtureSpec with pipeline-internal component paths filled in."""
        components = []
        for c in self.mix_components:
            path = c.path
            if not path:
                if in_domain_path is None:
                    raise ConfigError(
                        [f"mix component {c.name!r} has no path and no pipeline default"]
                    )
                path = in_domain_path
            components.append(MixtureComponent(name=c.name, path=path, weight=c.weight))
        return MixtureSpec(
            components=tuple(components),
            total_token_budget=self.total_token_budget,
            seed=self.stage_seed("mix"),
        )


def _section(raw: dict, name: str, problems: list[str]) -> dict:
    value = raw.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        problems.append(f"{name}: must be a mapping")
        return {}
    return value


def _get_int(section: dict, key: str, default, problems: list[str], where: str, minimum=None):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        problems.append(f"{where}.{key}: must be an integer")
        return default
    if minimum is not None and value < minimum:
        problems.append(f"{where}.{key}: must be >= {minimum}, got {value}")
        return default
    return value


def _normalize_weight_keys(weights: dict, field_name: str) -> dict:
    """Map YAML/JSON key spellings onto the canonical option values."""
    if field_name == "tag_style":
        return dict(weights)
    out = {}
    for key, value in weights.items():
        if field_name == "blank_lines_between_turns":
            if isinstance(key, str) and key.isdigit():
                key = int(key)
        else:  # boolean fields
            if isinstance(key, str):
                lowered = key.strip().lower()
                if lowered in ("true", "yes", "1"):
                    key = True
                elif lowered in ("false", "no", "0"):
                    key = False
        out[key] = value
    return out


def load_raw_config(path: str | Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config file: {exc}"]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([f"cannot parse config file: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])
    return raw


def build_config(raw: dict, check_paths: bool = True) -> PipelineConfig:
    """Validate a raw config mapping into a PipelineConfig.

    Raises ConfigError carrying every violation found.  ``check_paths``
    additionally requires the input glob and referenced files to resolve.
    """
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])
    problems: list[str] = []

    seed = _get_int(raw, "seed", 0, problems, "root", minimum=0) or 0
    workers = _get_int(raw, "workers", 1, problems, "root", minimum=1) or 1

    input_glob = raw.get("input_glob", "")
    if not isinstance(input_glob, str) or not input_glob:
        problems.append("input_glob: required string")
        input_glob = ""
    elif check_paths and not expand_glob(input_glob):
        problems.append(f"input_glob: no files match {input_glob!r}")

    work_dir = raw.get("work_dir", "")
    if not isinstance(work_dir, str) or not work_dir:
        problems.append("work_dir: required string")
        work_dir = "."

    # -- filter ------------------------------------------------------------
    filter_cfg = _section(raw, "filter", problems)
    rule = EligibilityRule()
    try:
        languages = filter_cfg.get("allowed_languages", ["en"])
        if not isinstance(languages, (list, tuple, set)) or not all(
            isinstance(x, str) for x in languages
        ):
            problems.append("filter.allowed_languages: must be a list of language tags")
            languages = ["en"]
        min_duration = filter_cfg.get("min_duration_s", 120.0)
        if isinstance(min_duration, bool) or not isinstance(min_duration, (int, float)):
            problems.append("filter.min_duration_s: must be a number")
            min_duration = 120.0
        rule = EligibilityRule(
            min_duration_s=float(min_duration),
            min_speakers=_get_int(filter_cfg, "min_speakers", 2, problems, "filter", minimum=1)
            or 2,
            allowed_languages=frozenset(languages),
        )
    except ValueError as exc:
        problems.append(f"filter: {exc}")
    per_org_cap = _get_int(filter_cfg, "per_org_cap", None, problems, "filter", minimum=1)
    target_pool_size = (
        _get_int(filter_cfg, "target_pool_size", 1000, problems, "filter", minimum=1) or 1000
    )

    # -- score / select ----------------------------------------------------
    score_cfg = _section(raw, "score", problems)
    tokenizer_mode = score_cfg.get("tokenizer", "word")
    if tokenizer_mode not in MODES:
        problems.append(f"score.tokenizer: unknown mode {tokenizer_mode!r}")
        tokenizer_mode = "word"
    vocab_file = score_cfg.get("vocab_file")
    if tokenizer_mode == "external-vocab":
        if not vocab_file or not isinstance(vocab_file, str):
            problems.append("score.vocab_file: required for external-vocab mode")
        elif check_paths and not Path(vocab_file).is_file():
            problems.append(f"score.vocab_file: {vocab_file!r} not found")
    select_cfg = _section(raw, "select", problems)
    select_n = _get_int(select_cfg, "n", 1000, problems, "select", minimum=1) or 1000

    # -- anonymize -----------------------------------------------------------
    anon_cfg = _section(raw, "anonymize", problems)
    policy = default_policy(seed=derive_seed(seed, "anonymize"))
    policy_file = anon_cfg.get("policy_file")
    inline_policy = anon_cfg.get("policy")
    try:
        if policy_file is not None:
            if not isinstance(policy_file, str):
                problems.append("anonymize.policy_file: must be a path string")
            elif check_paths and not Path(policy_file).is_file():
                problems.append(f"anonymize.policy_file: {policy_file!r} not found")
            else:
                policy = AnonymizationPolicy.from_file(policy_file)
        elif inline_policy is not None:
            policy = AnonymizationPolicy.from_dict(inline_policy)
    except PolicyError as exc:
        problems.append(f"anonymize: {exc}")

    # -- augment -------------------------------------------------------------
    augment_cfg = _section(raw, "augment", problems)
    weights = augment_cfg.get("style_weights", DEFAULT_PLAN_WEIGHTS)
    plan = AugmentPlan(seed=derive_seed(seed, "augment"), **DEFAULT_PLAN_WEIGHTS)
    if not isinstance(weights, dict):
        problems.append("augment.style_weights: must be a mapping")
    else:
        merged = dict(DEFAULT_PLAN_WEIGHTS)
        for key, value in weights.items():
            if key not in DEFAULT_PLAN_WEIGHTS:
                problems.append(f"augment.style_weights: unknown field {key!r}")
            elif not isinstance(value, dict):
                problems.append(f"augment.style_weights.{key}: must be a mapping")
            else:
                merged[key] = _normalize_weight_keys(value, key)
        speaker_names = augment_cfg.get("speaker_names") or None
        speaker_roles = augment_cfg.get("speaker_roles") or None
        try:
            plan = AugmentPlan(
                seed=derive_seed(seed, "augment"),
                speaker_names=speaker_names,
                speaker_roles=speaker_roles,
                **merged,
            )
        except (ValueError, TypeError) as exc:
            problems.append(f"augment.style_weights: {exc}")

    # -- mix -------------------------------------------------------------
    mix_cfg = _section(raw, "mix", problems)
    total_token_budget = (
        _get_int(mix_cfg, "total_token_budget", 1_000_000, problems, "mix", minimum=1)
        or 1_000_000
    )
    raw_components = mix_cfg.get("components", [])
    components: list[MixtureComponent] = []
    if not isinstance(raw_components, list) or not raw_components:
        problems.append("mix.components: required list of components")
    else:
        weight_total = 0.0
        names = []
        for i, entry in enumerate(raw_components):
            if not isinstance(entry, dict):
                problems.append(f"mix.components[{i}]: must be a mapping")
                continue
            name = entry.get("name", "")
            if not isinstance(name, str) or not name:
                problems.append(f"mix.components[{i}]: name required")
                continue
            weight = entry.get("weight")
            if isinstance(weight, bool) or not isinstance(weight, (int, float)):
                problems.append(f"mix.components[{i}] ({name}): numeric weight required")
                continue
            if not 0.0 <= float(weight) <= 1.0:
                problems.append(f"mix.components[{i}] ({name}): weight must be in [0, 1]")
                continue
            path = entry.get("path") or ""
            if path and not isinstance(path, str):
                problems.append(f"mix.components[{i}] ({name}): path must be a string")
                continue
            if path and check_paths and not expand_glob(path):
                problems.append(f"mix.components[{i}] ({name}): no files match {path!r}")
            names.append(name)
            weight_total += float(weight)
            components.append(MixtureComponent(name=name, path=path, weight=float(weight)))
        if len(set(names)) != len(names):
            problems.append("mix.components: names must be unique")
        if components and abs(weight_total - 1.0) > 1e-9:
            problems.append(f"mix.components: weights sum to {weight_total:.6g}, expected 1")
        pathless = [c.name for c in components if not c.path]
        if len(pathless) > 1:
            problems.append(
                "mix.components: at most one component may omit its path "
                f"(pipeline-wired), got {pathless}"
            )

    # -- pack --------------------------------------------------------------
    pack_cfg = _section(raw, "pack", problems)
    context_length = (
        _get_int(pack_cfg, "context_length", DEFAULT_CONTEXT_LENGTH, problems, "pack", minimum=2)
        or DEFAULT_CONTEXT_LENGTH
    )
    shard_size = (
        _get_int(pack_cfg, "shard_size", DEFAULT_SHARD_SIZE, problems, "pack", minimum=1)
        or DEFAULT_SHARD_SIZE
    )

    # -- eval ----------------------------------------------------------------
    eval_cfg = _section(raw, "eval", problems)
    eval_settings = EvalSettings(
        templates_file=eval_cfg.get("templates_file"),
        endpoint_env=str(eval_cfg.get("endpoint_env", "JUDGE_ENDPOINT")),
        credential_env=str(eval_cfg.get("credential_env", "JUDGE_API_KEY")),
        model=str(eval_cfg.get("model", "default")),
        max_in_flight=_get_int(eval_cfg, "max_in_flight", 4, problems, "eval", minimum=1) or 4,
        position_swap=bool(eval_cfg.get("position_swap", True)),
    )
    if eval_settings.templates_file is not None:
        if not isinstance(eval_settings.templates_file, str):
            problems.append("eval.templates_file: must be a path string")
        elif check_paths and not Path(eval_settings.templates_file).is_file():
            problems.append(f"eval.templates_file: {eval_settings.templates_file!r} not found")

    if problems:
        raise ConfigError(problems)

    # The hash covers the transformation, not where or how wide it runs:
    # identical artifacts regardless of work_dir location or worker count.
    hash_source = {k: v for k, v in raw.items() if k not in ("work_dir", "workers")}

    return PipelineConfig(
        seed=seed,
        workers=workers,
        input_glob=input_glob,
        work_dir=Path(work_dir),
        rule=rule,
        per_org_cap=per_org_cap,
        target_pool_size=target_pool_size,
        tokenizer_mode=tokenizer_mode,
        vocab_file=vocab_file,
        select_n=select_n,
        policy=policy,
        plan=plan,
        mix_components=components,
        total_token_budget=total_token_budget,
        context_length=context_length,
        shard_size=shard_size,
        eval=eval_settings,
        raw=raw,
        config_hash=config_hash(hash_source),
    )


def validate_config(
    path: str | Path,
    seed_override: int | None = None,
    workers_override: int | None = None,
    check_paths: bool = True,
) -> PipelineConfig:
    """Load and validate a config file; CLI overrides are applied first
    so the config hash reflects what actually runs."""
    raw = load_raw_config(path)
    if seed_override is not None:
        raw["seed"] = seed_override
    if workers_override is not None:
        raw["workers"] = workers_override
    return build_config(raw, check_paths=check_paths)


def allocation_summary(cfg: PipelineConfig) -> list[str]:
    """Human-readable per-component token allocations, e.g. for validate."""
    lines = []
    for component in cfg.mix_components:
        allocation = int(round(component.weight * cfg.total_token_budget))
        lines.append(f"{allocation:,} per component ({component.name})")
    return lines
