"""Batch evaluation over line-delimited example files.

ROUGE input records: {"example_id", "task", "candidate", "reference", ...}
Judge input records: {"example_id", "task", "transcript",
                      "response_a", "response_b"}

Reports are JSON: per-task ROUGE means for the metric run, the win-rate
triple (plus the formatted line) for the judge run.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from pathlib import Path

from ..errors import SchemaViolationError
from ..jsonio import iter_lines, write_json
from .judge import JudgePair, assign_positions, judge_pairs, win_rates
from .rouge import rouge

logger = logging.getLogger(__name__)


def _records(path: str | Path):
    for src, lineno, line in iter_lines([path]):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolationError(f"{src}:{lineno}: not valid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise SchemaViolationError(f"{src}:{lineno}: record is not an object")
        yield record


def run_rouge_eval(in_path: str | Path, report_path: str | Path) -> dict:
    """Score every candidate/reference pair and write per-task means."""
    sums: dict[str, dict[str, dict[str, float]]] = defaultdict(
        lambda: {m: {"precision": 0.0, "recall": 0.0, "f1": 0.0} for m in ("r1", "r2", "rl")}
    )
    counts: dict[str, int] = defaultdict(int)
    for record in _records(in_path):
        task = record.get("task", "unknown")
        score = rouge(record.get("candidate", ""), record.get("reference", ""))
        for metric, values in score.to_dict().items():
            for key, value in values.items():
                sums[task][metric][key] += value
        counts[task] += 1
    report = {
        "examples": sum(counts.values()),
        "per_task": {
            task: {
                metric: {key: value / counts[task] for key, value in values.items()}
                for metric, values in metrics.items()
            }
            for task, metrics in sums.items()
        },
    }
    write_json(report_path, report)
    return report


def load_judge_pairs(in_path: str | Path) -> list[JudgePair]:
    pairs = []
    for record in _records(in_path):
        try:
            pairs.append(
                JudgePair(
                    example_id=str(record["example_id"]),
                    task=str(record.get("task", "")),
                    transcript=str(record.get("transcript", "")),
                    response_a=str(record["response_a"]),
                    response_b=str(record["response_b"]),
                )
            )
        except KeyError as exc:
            raise SchemaViolationError(f"judge record missing field {exc}") from exc
    return pairs


def run_judge_eval(
    in_path: str | Path,
    report_path: str | Path,
    client,
    swap_seed: int = 0,
    position_swap: bool = True,
    max_in_flight: int = 4,
) -> dict:
    """Judge every pair, aggregate win rates, and write the report."""
    pairs = load_judge_pairs(in_path)
    pairs = assign_positions(pairs, seed=swap_seed, enabled=position_swap)
    judged = judge_pairs(pairs, client, max_in_flight=max_in_flight)
    rates = win_rates(judged)
    errors: dict[str, int] = defaultdict(int)
    for pair in judged:
        if pair.error:
            errors[pair.error] += 1
    report = {
        "pairs": len(judged),
        "win_rates": rates.to_dict(),
        "formatted": rates.formatted(),
        "errors": dict(errors),
        "verdicts": [
            {"example_id": p.example_id, "verdict": p.verdict, "error": p.error}
            for p in judged
        ],
    }
    write_json(report_path, report)
    logger.info("judge: %s", rates.formatted())
    return report
