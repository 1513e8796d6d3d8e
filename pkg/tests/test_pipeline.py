"""End-to-end pipeline: CLI, resume, composability, provenance."""

from __future__ import annotations

import re
import shutil
from pathlib import Path

import yaml

from convcorpus.cli import main
from convcorpus.jsonio import read_json
from helpers import build_corpus, pipeline_config_dict

STAGE_ARTIFACTS_EXCLUDED = {"run_summary.json"}


def _write_config(tmp_path, raw, name="config.yaml") -> Path:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


def _setup(tmp_path, work_name="work", **kwargs):
    input_glob, replay_glob = build_corpus(tmp_path, **kwargs.pop("corpus", {}))
    raw = pipeline_config_dict(
        input_glob, replay_glob, str(tmp_path / work_name), budget=8000, **kwargs
    )
    return raw


def _artifact_bytes(work_dir: Path) -> dict[str, bytes]:
    out = {}
    for path in sorted(work_dir.rglob("*")):
        if path.is_file() and path.name not in STAGE_ARTIFACTS_EXCLUDED:
            out[str(path.relative_to(work_dir))] = path.read_bytes()
    return out


def test_desk_scale_run(tmp_path):
    # 2,000 transcripts -> 1,000 selected (half the pool), mixed 1:1 with
    # 1,000 replay documents, packed at L = 128.
    raw = _setup(
        tmp_path,
        corpus={"n_transcripts": 2000, "n_replay": 1000, "n_ineligible": 20},
        select_n=1000,
        target_pool_size=2000,
    )
    raw["mix"]["total_token_budget"] = 100_000
    config = _write_config(tmp_path, raw)
    assert main(["--config", str(config), "run"]) == 0

    work = tmp_path / "work"
    report = read_json(work / "filter_report.json")
    assert report["eligible"] == 2000
    assert report["rejected"].get("speakers") == 20
    assert sum(1 for _ in open(work / "selected.jsonl")) == 1000
    assert sum(1 for _ in open(work / "documents.jsonl")) == 1000

    mix_manifest = read_json(work / "mixed" / "manifest.json")
    assert set(mix_manifest["component_tokens"]) == {"in_domain", "replay"}
    assert not mix_manifest["underflow_components"]
    for tokens in mix_manifest["component_tokens"].values():
        assert tokens <= 50_000
    pack_manifest = read_json(work / "packed" / "manifest.json")
    assert pack_manifest["extra"]["context_length"] == 128
    assert pack_manifest["windows"] >= 1
    assert pack_manifest["truncated_tokens"] == 0
    summary = read_json(work / "run_summary.json")
    assert [s["stage"] for s in summary["stages"]] == [
        "filter", "score", "select", "anonymize", "augment", "mix", "pack",
    ]

    # Anonymization happens before rendering: no planted name or raw phone
    # number survives into the rendered documents or the packed windows.
    audit = read_json(work / "anonymize_audit.json")
    assert audit["replaced_counts"].get("PHONE_NUMBER", 0) > 0
    assert audit["replaced_counts"].get("PERSON_NAME", 0) > 0
    documents_text = (work / "documents.jsonl").read_text(encoding="utf-8")
    for name in ("Ada", "Bianca", "Carlos"):
        assert name not in documents_text
    assert not re.search(r"\d{3}-\d{3}-\d{4}", documents_text)
    packed_text = "".join(
        p.read_text(encoding="utf-8") for p in sorted((work / "packed").glob("shard-*.jsonl"))
    )
    for name in ("Ada", "Bianca", "Carlos"):
        assert name not in packed_text


def test_empty_input_fails_before_any_stage(tmp_path):
    raw = _setup(tmp_path)
    raw["input_glob"] = str(tmp_path / "void" / "*.jsonl")
    config = _write_config(tmp_path, raw)
    assert main(["--config", str(config), "run"]) == 2
    assert not (tmp_path / "work" / "filtered.jsonl").exists()


def test_validate_command(tmp_path, capsys):
    raw = _setup(tmp_path)
    raw["mix"]["total_token_budget"] = 50_000_000_000
    config = _write_config(tmp_path, raw)
    assert main(["--config", str(config), "validate"]) == 0
    out = capsys.readouterr().out
    assert "config OK" in out
    assert "25,000,000,000 per component" in out


def test_validate_reports_violations(tmp_path, capsys):
    raw = _setup(tmp_path)
    raw["mix"]["components"][0]["weight"] = 0.9
    raw["select"] = {"n": 0}
    config = _write_config(tmp_path, raw)
    assert main(["--config", str(config), "validate"]) == 2
    err = capsys.readouterr().err
    assert "sum" in err and "select.n" in err


def test_resumed_run_is_byte_identical(tmp_path):
    raw = _setup(tmp_path)
    config = _write_config(tmp_path, raw)
    assert main(["--config", str(config), "run"]) == 0
    work = tmp_path / "work"
    reference = _artifact_bytes(work)

    # Simulate an interruption after augment: mix and pack outputs are gone.
    shutil.rmtree(work / "mixed")
    shutil.rmtree(work / "packed")
    assert main(["--config", str(config), "run"]) == 0
    assert _artifact_bytes(work) == reference

    summary = read_json(work / "run_summary.json")
    by_stage = {s["stage"]: s for s in summary["stages"]}
    assert by_stage["filter"]["resumed"] is True
    assert by_stage["mix"]["resumed"] is False


def test_stage_composability_bit_for_bit(tmp_path):
    raw_full = _setup(tmp_path, work_name="work_full")
    config_full = _write_config(tmp_path, raw_full, name="full.yaml")
    assert main(["--config", str(config_full), "run"]) == 0

    raw_steps = dict(raw_full, work_dir=str(tmp_path / "work_steps"))
    config_steps = _write_config(tmp_path, raw_steps, name="steps.yaml")
    for stage in ("filter", "score", "select", "anonymize", "augment", "mix", "pack"):
        assert main(["--config", str(config_steps), stage]) == 0, stage

    full = _artifact_bytes(tmp_path / "work_full")
    steps = _artifact_bytes(tmp_path / "work_steps")
    assert full == steps


def test_rerun_with_different_seed_rejects_stale_inputs(tmp_path):
    raw = _setup(tmp_path)
    config = _write_config(tmp_path, raw)
    assert main(["--config", str(config), "run"]) == 0
    raw["seed"] = raw["seed"] + 1
    config2 = _write_config(tmp_path, raw, name="config2.yaml")
    # Scoring must refuse the filtered file produced under the old config.
    assert main(["--config", str(config2), "score"]) == 3


def test_workers_do_not_change_bytes(tmp_path):
    raw1 = _setup(tmp_path, work_name="w1")
    raw1["workers"] = 1
    raw2 = dict(raw1, work_dir=str(tmp_path / "w2"), workers=2)
    cfg1 = _write_config(tmp_path, raw1, name="c1.yaml")
    cfg2 = _write_config(tmp_path, raw2, name="c2.yaml")
    assert main(["--config", str(cfg1), "run"]) == 0
    assert main(["--config", str(cfg2), "run"]) == 0
    assert _artifact_bytes(tmp_path / "w1") == _artifact_bytes(tmp_path / "w2")


def test_standalone_stage_commands_on_files(tmp_path):
    input_glob, _ = build_corpus(tmp_path, n_transcripts=30, n_replay=0, n_ineligible=5)
    filtered = tmp_path / "f.jsonl"
    scores = tmp_path / "s.jsonl"
    selected = tmp_path / "sel.jsonl"
    assert (
        main(["filter", "--in", input_glob, "--out", str(filtered), "--report", str(tmp_path / "r.json")])
        == 0
    )
    assert read_json(tmp_path / "r.json")["eligible"] == 30
    assert main(["score", "--in", str(filtered), "--out", str(scores)]) == 0
    assert main(["select", "--n", "10", "--scores", str(scores), "--out", str(selected)]) == 0
    assert sum(1 for _ in open(selected)) == 10

    policy = tmp_path / "policy.yaml"
    policy.write_text(
        yaml.safe_dump(
            {
                "seed": 3,
                "info_types": [
                    {"name": "EMAIL", "detector": "regex",
                     "pattern": r"[\w.]+@[\w.]+\.[A-Za-z]{2,}", "action": "mask"}
                ],
            }
        ),
        encoding="utf-8",
    )
    anon = tmp_path / "anon.jsonl"
    assert main(["anonymize", "--policy", str(policy), "--in", str(filtered), "--out", str(anon)]) == 0
    docs = tmp_path / "docs.jsonl"
    assert main(["augment", "--in", str(anon), "--out", str(docs)]) == 0

    spec = tmp_path / "spec.yaml"
    spec.write_text(
        yaml.safe_dump(
            {
                "seed": 5,
                "total_token_budget": 2000,
                "components": [{"name": "all", "path": str(docs), "weight": 1.0}],
            }
        ),
        encoding="utf-8",
    )
    mixed = tmp_path / "mixed"
    assert main(["mix", "--spec", str(spec), "--out", str(mixed)]) == 0
    packed = tmp_path / "packed"
    assert main(["pack", "--L", "64", "--in", str(mixed), "--out", str(packed)]) == 0
    manifest = read_json(packed / "manifest.json")
    assert manifest["windows"] >= 1


def test_missing_flags_exit_config_invalid(tmp_path):
    assert main(["score"]) == 2
    assert main(["filter"]) == 2
    assert main(["pack"]) == 2


def test_io_error_exit_code(tmp_path):
    scores_dir = tmp_path / "scores-as-dir"
    scores_dir.mkdir()
    code = main(
        ["select", "--n", "5", "--scores", str(scores_dir), "--out", str(tmp_path / "o.jsonl")]
    )
    assert code == 4
