"""Synthetic data generators shared across the test suite."""

from __future__ import annotations

import json
import random

from convcorpus.transcripts import Transcript, Turn

VOCAB = (
    "okay sure thanks hello yes no maybe billing invoice account order status "
    "ship update call back email send receive plan price support agent team "
    "today tomorrow monday review confirm cancel renew upgrade issue fix "
    "great perfect sorry wait moment check number detail question answer"
).split()


def make_transcript(
    rng: random.Random,
    tid: str,
    org_id: str = "org-1",
    language: str = "en",
    n_speakers: int = 2,
    n_turns: int = 6,
    duration_s: float | None = None,
    min_words: int = 1,
    max_words: int = 12,
) -> Transcript:
    speakers = [f"spk-{i}" for i in range(n_speakers)]
    turns = []
    start = 0
    for i in range(n_turns):
        # Guarantee every speaker appears at least once.
        speaker = speakers[i] if i < n_speakers else rng.choice(speakers)
        words = rng.choices(VOCAB, k=rng.randint(min_words, max_words))
        turns.append(Turn(speaker_id=speaker, start_ms=start, text=" ".join(words)))
        start += rng.randint(500, 8000)
    if duration_s is None:
        duration_s = start / 1000.0 + rng.uniform(1.0, 30.0)
    return Transcript(
        id=tid, org_id=org_id, language=language, duration_s=duration_s, turns=tuple(turns)
    )


def record_dict(t: Transcript) -> dict:
    return {
        "id": t.id,
        "org_id": t.org_id,
        "language": t.language,
        "duration_s": t.duration_s,
        "turns": [
            {"speaker": turn.speaker_id, "start_ms": turn.start_ms, "text": turn.text}
            for turn in t.turns
        ],
    }


def record_line(t: Transcript) -> str:
    return json.dumps(record_dict(t), ensure_ascii=False)


def eligible_transcript(rng: random.Random, tid: str, org_id: str = "org-1") -> Transcript:
    """A transcript guaranteed to pass the default eligibility rule."""
    return make_transcript(
        rng,
        tid,
        org_id=org_id,
        n_speakers=rng.randint(2, 4),
        n_turns=rng.randint(4, 10),
        duration_s=rng.uniform(120.0, 1800.0),
    )


def document_line(doc_id: str, text: str, source: str = "", token_count: int = 0) -> str:
    return json.dumps(
        {"doc_id": doc_id, "source": source, "text": text, "token_count": token_count},
        ensure_ascii=False,
    )


def random_text(rng: random.Random, n_words: int) -> str:
    return " ".join(rng.choices(VOCAB, k=n_words))


PLANTED_NAMES = ("Ada", "Bianca", "Carlos")


def _plant_sensitive(rng: random.Random, t: Transcript) -> Transcript:
    """Drop a known name and phone number into one turn of the transcript."""
    turns = list(t.turns)
    idx = rng.randrange(len(turns))
    victim = turns[idx]
    phone = f"{rng.randint(200, 999)}-{rng.randint(200, 999)}-{rng.randint(1000, 9999)}"
    turns[idx] = Turn(
        speaker_id=victim.speaker_id,
        start_ms=victim.start_ms,
        text=f"{victim.text} ask for {rng.choice(PLANTED_NAMES)} at {phone}",
    )
    return Transcript(
        id=t.id, org_id=t.org_id, language=t.language, duration_s=t.duration_s,
        turns=tuple(turns),
    )


def build_corpus(
    tmp_path,
    n_transcripts: int = 200,
    n_replay: int = 100,
    n_ineligible: int = 20,
    seed: int = 2024,
):
    """Write a synthetic input corpus + replay docs; returns their globs.

    Every third transcript carries a planted name and phone number so
    anonymization has real work to do.
    """
    rng = random.Random(seed)
    data_dir = tmp_path / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(n_transcripts):
        t = eligible_transcript(rng, f"call-{i:05d}", org_id=f"org-{i % 23}")
        if i % 3 == 0:
            t = _plant_sensitive(rng, t)
        lines.append(record_line(t))
    for i in range(n_ineligible):
        bad = make_transcript(
            rng, f"bad-{i:04d}", n_speakers=1, duration_s=rng.uniform(130, 300)
        )
        lines.append(record_line(bad))
    # Split across two shards to exercise multi-file globs.
    half = len(lines) // 2
    (data_dir / "part-0.jsonl").write_text("\n".join(lines[:half]) + "\n", encoding="utf-8")
    (data_dir / "part-1.jsonl").write_text("\n".join(lines[half:]) + "\n", encoding="utf-8")

    replay_dir = tmp_path / "replay"
    replay_dir.mkdir(parents=True, exist_ok=True)
    replay_lines = [
        document_line(f"web-{i:05d}", random_text(rng, rng.randint(20, 120)))
        for i in range(n_replay)
    ]
    (replay_dir / "replay-0.jsonl").write_text("\n".join(replay_lines) + "\n", encoding="utf-8")
    return str(data_dir / "*.jsonl"), str(replay_dir / "*.jsonl")


def pipeline_config_dict(
    input_glob: str,
    replay_glob: str,
    work_dir: str,
    seed: int = 77,
    workers: int = 1,
    select_n: int = 100,
    target_pool_size: int = 1000,
    budget: int = 20_000,
    context_length: int = 128,
    shard_size: int = 50,
) -> dict:
    return {
        "seed": seed,
        "workers": workers,
        "input_glob": input_glob,
        "work_dir": work_dir,
        "filter": {
            "min_duration_s": 120.0,
            "min_speakers": 2,
            "allowed_languages": ["en"],
            "per_org_cap": None,
            "target_pool_size": target_pool_size,
        },
        "score": {"tokenizer": "word"},
        "select": {"n": select_n},
        "anonymize": {
            "policy": {
                "seed": 9,
                "info_types": [
                    {
                        "name": "PHONE_NUMBER",
                        "detector": "regex",
                        "pattern": r"(?<!\d)\d{3}-\d{3}-\d{4}(?!\d)",
                        "action": "mask",
                    },
                    {
                        "name": "PERSON_NAME",
                        "detector": "dictionary",
                        "terms": ["Ada", "Bianca", "Carlos"],
                        "action": "noise",
                        "pool": ["Alex", "Jordan", "Taylor"],
                    },
                ],
            }
        },
        "augment": {
            "style_weights": {
                "tag_style": {"speaker-index": 0.5, "role": 0.5},
                "timestamps": {False: 0.5, True: 0.5},
                "blank_lines_between_turns": {0: 0.5, 1: 0.25, 2: 0.25},
                "merge_consecutive": {False: 0.5, True: 0.5},
            }
        },
        "mix": {
            "total_token_budget": budget,
            "components": [
                {"name": "in_domain", "path": None, "weight": 0.5},
                {"name": "replay", "path": replay_glob, "weight": 0.5},
            ],
        },
        "pack": {"context_length": context_length, "shard_size": shard_size},
    }
