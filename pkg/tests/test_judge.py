"""Pairwise judge protocol: prompt build, parsing, verdicts, win rates."""

from __future__ import annotations

import json
import random
import threading
from dataclasses import replace
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from convcorpus.errors import JudgeParseError, JudgeServiceError, NoJudgedPairsError
from convcorpus.evaluation.judge import (
    HttpJudgeClient,
    JudgePair,
    assign_positions,
    build_judge_prompt,
    judge_pair,
    judge_pairs,
    parse_ratings,
    win_rates,
)


def _pair(example_id="e1", swapped=False) -> JudgePair:
    return JudgePair(
        example_id=example_id,
        task="Summarize the call.",
        transcript="Speaker 1: hi\nSpeaker 2: hello",
        response_a="answer from model a",
        response_b="answer from model b",
        position_swapped=swapped,
    )


def _answer(first: tuple, second: tuple) -> str:
    return json.dumps(
        [{"ratings": v, "rationale": "because"} for v in (*first, *second)]
    )


class ScriptedClient:
    """Returns canned judge answers keyed by the first-position response text."""

    def __init__(self, by_first_response: dict[str, str]):
        self.by_first_response = by_first_response
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        for key, answer in self.by_first_response.items():
            if f"\n{key}\n" in prompt or prompt.endswith(key + "\n"):
                return answer
        raise AssertionError("no scripted answer matches the prompt")


def test_prompt_contains_context_and_headers():
    prompt = build_judge_prompt(_pair())
    assert "Likert scale from 1 to 5" in prompt
    assert "Factual Correctness" in prompt
    assert "Summarize the call." in prompt
    assert "Speaker 2: hello" in prompt
    # Natural order: A's text precedes B's.
    assert prompt.index("answer from model a") < prompt.index("answer from model b")


def test_prompt_swaps_positions():
    prompt = build_judge_prompt(_pair(swapped=True))
    assert prompt.index("answer from model b") < prompt.index("answer from model a")


def test_parse_ratings_shapes():
    first, second = parse_ratings(_answer((5, 5, 4, 4), (3, 3, 3, 3)))
    assert first == (5, 5, 4, 4)
    assert second == (3, 3, 3, 3)
    fenced = "Here you go:\n```json\n" + _answer((1, 2, 3, 4), (5, 4, 3, 2)) + "\n```"
    assert parse_ratings(fenced) == ((1, 2, 3, 4), (5, 4, 3, 2))
    with_prose = "Sure! " + _answer((2, 2, 2, 2), (2, 2, 2, 2)) + " hope that helps"
    assert parse_ratings(with_prose)[0] == (2, 2, 2, 2)


@pytest.mark.parametrize(
    "bad",
    [
        "no array here",
        "[1, 2, 3]",
        json.dumps([{"ratings": 5}] * 7),
        json.dumps([{"ratings": 5}] * 9),
        json.dumps([{"ratings": 6}] * 8),
        json.dumps([{"ratings": 0}] * 8),
        json.dumps([{"ratings": "five"}] * 8),
        json.dumps([{"rationale": "no rating"}] * 8),
        json.dumps([{"ratings": True}] * 8),
    ],
)
def test_parse_rejects_nonconforming(bad):
    with pytest.raises(JudgeParseError):
        parse_ratings(bad)


def test_dominant_ratings_verdict_a():
    client = ScriptedClient({"answer from model a": _answer((5, 5, 4, 4), (3, 3, 3, 3))})
    judged = judge_pair(_pair(), client)
    assert judged.verdict == "A"
    assert judged.ratings_a == (5, 5, 4, 4)
    assert judged.ratings_b == (3, 3, 3, 3)


def test_equal_ratings_tie():
    client = ScriptedClient({"answer from model a": _answer((4, 4, 4, 4), (4, 4, 4, 4))})
    assert judge_pair(_pair(), client).verdict == "tie"


def test_swapped_pair_unswaps_before_verdict():
    # The judge sees B first and rates first-position higher; the verdict
    # must land on the underlying model B.
    client = ScriptedClient({"answer from model b": _answer((5, 5, 5, 5), (1, 1, 1, 1))})
    judged = judge_pair(_pair(swapped=True), client)
    assert judged.ratings_b == (5, 5, 5, 5)
    assert judged.ratings_a == (1, 1, 1, 1)
    assert judged.verdict == "B"


def test_verdicts_invariant_under_position_swap():
    rng = random.Random(3)
    for _ in range(100):
        ratings_a = tuple(rng.randint(1, 5) for _ in range(4))
        ratings_b = tuple(rng.randint(1, 5) for _ in range(4))
        natural = ScriptedClient({"answer from model a": _answer(ratings_a, ratings_b)})
        swapped = ScriptedClient({"answer from model b": _answer(ratings_b, ratings_a)})
        v1 = judge_pair(_pair(), natural).verdict
        v2 = judge_pair(_pair(swapped=True), swapped).verdict
        assert v1 == v2


def test_mean_compare_oracle_on_200_rating_arrays():
    rng = random.Random(4)
    for _ in range(200):
        ratings_a = tuple(rng.randint(1, 5) for _ in range(4))
        ratings_b = tuple(rng.randint(1, 5) for _ in range(4))
        client = ScriptedClient({"answer from model a": _answer(ratings_a, ratings_b)})
        verdict = judge_pair(_pair(), client).verdict
        mean_a = sum(ratings_a) / 4
        mean_b = sum(ratings_b) / 4
        expected = "A" if mean_a > mean_b else ("B" if mean_b > mean_a else "tie")
        assert verdict == expected


def test_parse_error_is_recorded_and_excluded():
    client = ScriptedClient({"answer from model a": "gibberish"})
    judged = judge_pair(_pair(), client)
    assert judged.error == "parse-error"
    assert judged.verdict is None


class FailingClient:
    def complete(self, prompt):
        raise JudgeServiceError("down")


def test_service_error_is_recorded():
    judged = judge_pair(_pair(), FailingClient())
    assert judged.error == "service-error"


def test_assign_positions_seeded_half():
    pairs = [_pair(example_id=f"e{i}") for i in range(1000)]
    assigned = assign_positions(pairs, seed=9)
    swapped = sum(1 for p in assigned if p.position_swapped)
    assert 400 < swapped < 600
    again = assign_positions(pairs, seed=9)
    assert [p.position_swapped for p in assigned] == [p.position_swapped for p in again]
    off = assign_positions(pairs, seed=9, enabled=False)
    assert not any(p.position_swapped for p in off)


def test_win_rates_counting_oracle():
    rng = random.Random(5)
    verdicts = [rng.choice(["A", "B", "tie", None]) for _ in range(1000)]
    pairs = [
        replace(_pair(example_id=f"e{i}"), verdict=v, error=None if v else "parse-error")
        for i, v in enumerate(verdicts)
    ]
    rates = win_rates(pairs)
    judged = [v for v in verdicts if v]
    assert rates.judged == len(judged)
    assert rates.excluded == len(verdicts) - len(judged)
    assert rates.win_a == round(100 * judged.count("A") / len(judged), 1)
    assert rates.win_b == round(100 * judged.count("B") / len(judged), 1)
    assert rates.tie == round(100 * judged.count("tie") / len(judged), 1)
    assert abs(rates.win_a + rates.win_b + rates.tie - 100.0) <= 0.1 + 1e-9


def test_win_rates_unanimous_and_empty():
    pairs = [replace(_pair(example_id=f"e{i}"), verdict="A") for i in range(10)]
    rates = win_rates(pairs)
    assert (rates.win_a, rates.win_b, rates.tie) == (100.0, 0.0, 0.0)
    with pytest.raises(NoJudgedPairsError):
        win_rates([replace(_pair(), error="parse-error")])


def test_formatted_report_shape():
    pairs = (
        [replace(_pair(example_id=f"a{i}"), verdict="A") for i in range(45)]
        + [replace(_pair(example_id=f"b{i}"), verdict="B") for i in range(29)]
        + [replace(_pair(example_id=f"t{i}"), verdict="tie") for i in range(26)]
    )
    assert win_rates(pairs).formatted() == "A 45%, B 29%, tie 26%"


# --- HTTP client against a stub service --------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    script = {}
    failures_left = 0

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        if _StubHandler.failures_left > 0:
            _StubHandler.failures_left -= 1
            self.send_response(500)
            self.end_headers()
            return
        prompt = body.get("prompt", "")
        answer = None
        for key, value in _StubHandler.script.items():
            if key in prompt:
                answer = value
                break
        payload = json.dumps({"text": answer or "[]"}).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server(monkeypatch):
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    monkeypatch.setenv("TEST_JUDGE_ENDPOINT", f"http://127.0.0.1:{server.server_port}/judge")
    monkeypatch.delenv("TEST_JUDGE_KEY", raising=False)
    yield server
    server.shutdown()


def test_http_client_round_trip(stub_server):
    _StubHandler.script = {"answer from model a": _answer((5, 4, 5, 4), (2, 2, 2, 2))}
    _StubHandler.failures_left = 0
    client = HttpJudgeClient(
        endpoint_env="TEST_JUDGE_ENDPOINT", credential_env="TEST_JUDGE_KEY", backoff_s=0.01
    )
    judged = judge_pairs([_pair(example_id=f"e{i}") for i in range(6)], client, max_in_flight=3)
    assert all(p.verdict == "A" for p in judged)


def test_http_client_retries_then_succeeds(stub_server):
    _StubHandler.script = {"answer from model a": _answer((3, 3, 3, 3), (1, 1, 1, 1))}
    _StubHandler.failures_left = 2
    client = HttpJudgeClient(
        endpoint_env="TEST_JUDGE_ENDPOINT", credential_env="TEST_JUDGE_KEY",
        max_retries=3, backoff_s=0.01,
    )
    assert judge_pair(_pair(), client).verdict == "A"


def test_http_client_missing_endpoint_env(monkeypatch):
    monkeypatch.delenv("NOPE_ENDPOINT", raising=False)
    client = HttpJudgeClient(endpoint_env="NOPE_ENDPOINT")
    with pytest.raises(JudgeServiceError):
        client.complete("hello")


def test_eval_judge_cli_uses_config_eval_section(stub_server, tmp_path, monkeypatch):
    import yaml

    from convcorpus.cli import main
    from helpers import build_corpus, pipeline_config_dict

    _StubHandler.script = {"answer from model a": _answer((5, 5, 5, 5), (1, 1, 1, 1))}
    _StubHandler.failures_left = 0
    monkeypatch.delenv("JUDGE_ENDPOINT", raising=False)

    input_glob, replay_glob = build_corpus(tmp_path, n_transcripts=3, n_replay=3)
    raw = pipeline_config_dict(input_glob, replay_glob, str(tmp_path / "w"))
    raw["eval"] = {"endpoint_env": "TEST_JUDGE_ENDPOINT", "max_in_flight": 2}
    config = tmp_path / "cfg.yaml"
    config.write_text(yaml.safe_dump(raw), encoding="utf-8")

    pairs = tmp_path / "pairs.jsonl"
    pairs.write_text(
        json.dumps(
            {
                "example_id": "e1",
                "task": "t",
                "transcript": "x",
                "response_a": "answer from model a",
                "response_b": "answer from model b",
            }
        )
        + "\n",
        encoding="utf-8",
    )
    report = tmp_path / "judge.json"
    code = main(
        ["--config", str(config), "eval", "judge",
         "--in", str(pairs), "--report", str(report), "--no-position-swap"]
    )
    assert code == 0
    assert json.loads(report.read_text())["win_rates"]["win_a_pct"] == 100.0
