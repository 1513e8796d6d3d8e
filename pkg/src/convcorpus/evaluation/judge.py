"""Pairwise response judging with an external LLM endpoint.

The judge receives a fixed rating prompt (task description, transcript,
and the two candidate responses) and must answer with an array of eight
JSON objects — four criterion ratings for the first-position model, then
four for the second — each object carrying integer ``ratings`` 1-5 and a
``rationale``.  A pair's verdict compares the two per-model rating means;
equal means tie.  Pairs may be presented position-swapped as a bias
control; ratings are un-swapped before the verdict, so verdicts always
refer to the underlying models.

Transport or parse failures never poison aggregation: affected pairs are
flagged, excluded from win rates, and counted separately.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import requests

from ..errors import JudgeParseError, JudgeServiceError, NoJudgedPairsError
from ..hashing import stable_hash64

logger = logging.getLogger(__name__)

CRITERIA = (
    "Factual Correctness",
    "Instruction Following",
    "Clarity and Conciseness",
    "Structure and Formatting",
)

JUDGE_PROMPT_BODY = """\
You are provided with a task description, a transcript, and two responses generated by AI models (Model A and Model B).

Your goal is to evaluate the quality of each response based on the provided context.

Please rate each model on a Likert scale from 1 to 5 based on the criteria given below.

*Evaluation Criteria*

1: Factual Correctness: How accurately does the response reflect the information present in the transcript? Does it contain any information that is incorrect or not mentioned in the source?

2: Instruction Following: How well does the response adhere to all instructions and constraints outlined in the task description?

3: Clarity and Conciseness: Is the response easy to read, succinct, and to the point, avoiding unnecessary jargon, repetition, or filler words?

4: Structure and Formatting: Is the response use formatting appropriately for the task based on the requirement?

*Rating Scale*

1: The response is extremely poor.

2: The response is poor.

3: The response is average.

4: The response is good.

5: The response is excellent.

Please provide your complete evaluation in an Array of JSON objects format that contains the following keys: (i) ratings, and (ii) rationale. Here, ratings will contain an integer value between 1-5 (inclusive), while rationale will contain a brief justification for the rating.

The task description, transcript, and the responses generated by the AI models are given below.

[Task Description]

[Transcript]

[Model A Response]

[Model B Response]
"""


@dataclass(frozen=True)
class JudgePair:
    """Two candidate responses for one example, plus judging outcome."""

    example_id: str
    task: str
    transcript: str
    response_a: str
    response_b: str
    position_swapped: bool = False
    ratings_a: tuple[int, int, int, int] | None = None
    ratings_b: tuple[int, int, int, int] | None = None
    verdict: str | None = None  # "A" | "B" | "tie"
    error: str | None = None  # "service-error" | "parse-error"


def build_judge_prompt(pair: JudgePair) -> str:
    """Fill the rating prompt; a swapped pair presents B first."""
    first, second = pair.response_a, pair.response_b
    if pair.position_swapped:
        first, second = second, first
    prompt = JUDGE_PROMPT_BODY
    prompt = prompt.replace("[Task Description]", pair.task)
    prompt = prompt.replace("[Transcript]", pair.transcript)
    prompt = prompt.replace("[Model A Response]", first)
    prompt = prompt.replace("[Model B Response]", second)
    return prompt


_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def _extract_array(text: str) -> list:
    """Pull the first JSON array out of a judge answer, fenced or bare."""
    fenced = _FENCE_RE.search(text)
    if fenced:
        text = fenced.group(1)
    start = text.find("[")
    if start < 0:
        raise JudgeParseError("judge answer contains no JSON array")
    try:
        parsed, _ = json.JSONDecoder().raw_decode(text[start:])
    except json.JSONDecodeError as exc:
        raise JudgeParseError(f"judge answer is not valid JSON: {exc}") from exc
    if not isinstance(parsed, list):
        raise JudgeParseError("judge answer is not a JSON array")
    return parsed


def parse_ratings(text: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Parse eight ordered rating objects into (first-model, second-model).

    Anything but exactly eight objects with integer ratings 1-5 flags the
    pair unparseable.
    """
    items = _extract_array(text)
    if len(items) != len(CRITERIA) * 2:
        raise JudgeParseError(
            f"expected {len(CRITERIA) * 2} rating objects, got {len(items)}"
        )
    values = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "ratings" not in item:
            raise JudgeParseError(f"rating object {i} is missing the 'ratings' key")
        value = item["ratings"]
        if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
            raise JudgeParseError(f"rating object {i}: {value!r} is not an integer 1-5")
        values.append(value)
    half = len(CRITERIA)
    return tuple(values[:half]), tuple(values[half:])


def _verdict(ratings_a: tuple[int, ...], ratings_b: tuple[int, ...]) -> str:
    # Comparing sums avoids float means entirely.
    if sum(ratings_a) > sum(ratings_b):
        return "A"
    if sum(ratings_b) > sum(ratings_a):
        return "B"
    return "tie"


def judge_pair(pair: JudgePair, client) -> JudgePair:
    """Run one pair through the judge and attach ratings plus verdict.

    ``client`` needs a ``complete(prompt) -> str`` method.  Failures are
    recorded on the pair (service-error / parse-error), not raised.
    """
    prompt = build_judge_prompt(pair)
    try:
        answer = client.complete(prompt)
    except JudgeServiceError as exc:
        logger.warning("pair %s: judge service failed: %s", pair.example_id, exc)
        return replace(pair, error="service-error")
    try:
        first, second = parse_ratings(answer)
    except JudgeParseError as exc:
        logger.warning("pair %s: unparseable judge answer: %s", pair.example_id, exc)
        return replace(pair, error="parse-error")
    if pair.position_swapped:
        ratings_a, ratings_b = second, first
    else:
        ratings_a, ratings_b = first, second
    return replace(
        pair,
        ratings_a=ratings_a,
        ratings_b=ratings_b,
        verdict=_verdict(ratings_a, ratings_b),
    )


def judge_pairs(pairs: list[JudgePair], client, max_in_flight: int = 4) -> list[JudgePair]:
    """Judge many pairs concurrently; results keep input order."""
    if max_in_flight <= 1 or len(pairs) <= 1:
        return [judge_pair(p, client) for p in pairs]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(lambda p: judge_pair(p, client), pairs))


def assign_positions(pairs: list[JudgePair], seed: int, enabled: bool = True) -> list[JudgePair]:
    """Mark a seeded half of the pairs position-swapped (bias control).

    Disable to present every pair in its natural order.
    """
    if not enabled:
        return [replace(p, position_swapped=False) for p in pairs]
    return [
        replace(p, position_swapped=stable_hash64(seed, "swap", p.example_id) % 2 == 1)
        for p in pairs
    ]


@dataclass(frozen=True)
class WinRates:
    win_a: float  # percentages over judged pairs
    win_b: float
    tie: float
    judged: int
    excluded: int

    def formatted(self) -> str:
        def fmt(v: float) -> str:
            return f"{v:.1f}".removesuffix(".0")

        return f"A {fmt(self.win_a)}%, B {fmt(self.win_b)}%, tie {fmt(self.tie)}%"

    def to_dict(self) -> dict:
        return {
            "win_a_pct": self.win_a,
            "win_b_pct": self.win_b,
            "tie_pct": self.tie,
            "judged": self.judged,
            "excluded": self.excluded,
        }


def win_rates(pairs: list[JudgePair]) -> WinRates:
    """Aggregate verdicts into percentages over judged pairs."""
    counts = {"A": 0, "B": 0, "tie": 0}
    excluded = 0
    for pair in pairs:
        if pair.verdict in counts:
            counts[pair.verdict] += 1
        else:
            excluded += 1
    judged = sum(counts.values())
    if judged == 0:
        raise NoJudgedPairsError("no judged pairs to aggregate")
    return WinRates(
        win_a=round(100.0 * counts["A"] / judged, 1),
        win_b=round(100.0 * counts["B"] / judged, 1),
        tie=round(100.0 * counts["tie"] / judged, 1),
        judged=judged,
        excluded=excluded,
    )


@dataclass
class HttpJudgeClient:
    """Judge endpoint client.

    POSTs ``{"model": ..., "prompt": ...}`` to the URL named by
    ``endpoint_env`` and reads the answer from the response body's
    ``text`` field.  A credential, when the named variable is set, goes
    out as a bearer token.  Transport errors retry with exponential
    backoff before surfacing as JudgeServiceError.
    """

    endpoint_env: str = "JUDGE_ENDPOINT"
    credential_env: str = "JUDGE_API_KEY"
    model: str = "default"
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_s: float = 0.5

    def _endpoint(self) -> str:
        url = os.environ.get(self.endpoint_env, "")
        if not url:
            raise JudgeServiceError(
                f"environment variable {self.endpoint_env} is not set"
            )
        return url

    def complete(self, prompt: str) -> str:
        url = self._endpoint()
        headers = {}
        credential = os.environ.get(self.credential_env or "", "")
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        body = {"model": self.model, "prompt": prompt}
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                response = requests.post(url, json=body, headers=headers, timeout=self.timeout_s)
                if response.status_code >= 500:
                    raise requests.RequestException(f"server error {response.status_code}")
                if response.status_code != 200:
                    raise JudgeServiceError(
                        f"judge endpoint returned {response.status_code}"
                    )
                payload = response.json()
                if not isinstance(payload, dict) or "text" not in payload:
                    raise JudgeServiceError("judge response body has no 'text' field")
                return payload["text"]
            except requests.RequestException as exc:
                last_error = exc
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff_s * (2**attempt))
        raise JudgeServiceError(f"judge endpoint unreachable: {last_error}")
