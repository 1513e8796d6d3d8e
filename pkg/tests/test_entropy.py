"""Entropy scoring and streaming top-N selection."""

from __future__ import annotations

import math
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from convcorpus.entropy import (
    SelectionRecord,
    select_top_n,
    selection_from_json,
    selection_to_json,
    token_type_entropy,
)
from convcorpus.errors import EmptyDocumentError
from convcorpus.tokenization import Tokenizer
from helpers import VOCAB

WORD = Tokenizer()


def direct_entropy(tokens: list[str]) -> float:
    """Independent count-based computation used as the oracle."""
    counts = Counter(tokens)
    total = len(tokens)
    return -sum((c / total) * math.log(c / total) for c in counts.values())


def test_single_type_is_zero():
    assert token_type_entropy("go go go go", WORD) == 0.0


def test_uniform_types_hit_upper_bound():
    h = token_type_entropy("alpha beta gamma delta", WORD)
    assert abs(h - math.log(4)) < 1e-12


def test_skewed_distribution_frozen_value():
    # tokens (a, a, b, c): H = -(0.5 ln 0.5 + 2 * 0.25 ln 0.25)
    h = token_type_entropy("a a b c", WORD)
    assert abs(h - 1.0397207708399179) < 1e-12
    assert abs(h - direct_entropy(["a", "a", "b", "c"])) < 1e-12


def test_empty_document_raises():
    with pytest.raises(EmptyDocumentError):
        token_type_entropy("", WORD)
    with pytest.raises(EmptyDocumentError):
        token_type_entropy("!!! --- ...", WORD)


def test_case_and_punctuation_folding():
    # Word mode lowercases and splits on non-alphanumeric runs.
    assert WORD.tokenize("Hello, HELLO?! world_2") == ["hello", "hello", "world", "2"]
    assert token_type_entropy("Go GO go. go!", WORD) == 0.0


@given(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=60))
def test_matches_direct_computation(words):
    h = token_type_entropy(" ".join(words), WORD)
    assert abs(h - direct_entropy(words)) < 1e-9


@given(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=40), st.randoms())
def test_permutation_invariance(words, rnd):
    shuffled = list(words)
    rnd.shuffle(shuffled)
    a = token_type_entropy(" ".join(words), WORD)
    b = token_type_entropy(" ".join(shuffled), WORD)
    assert abs(a - b) < 1e-9


@given(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=40))
def test_self_concatenation_invariance(words):
    text = " ".join(words)
    assert abs(
        token_type_entropy(text, WORD) - token_type_entropy(text + " " + text, WORD)
    ) < 1e-9


@given(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=60))
def test_bounds(words):
    h = token_type_entropy(" ".join(words), WORD)
    distinct = len(set(words))
    assert -1e-12 <= h <= math.log(distinct) + 1e-9


def test_external_vocab_longest_match():
    tok = Tokenizer(mode="external-vocab", vocab=["ab", "abc", "c", "d"])
    assert tok.tokenize("abcd") == ["abc", "d"]
    assert tok.tokenize("abzc") == ["ab", "z", "c"]  # unknown char passes through
    assert tok.tokenize("") == []


def test_external_vocab_requires_entries():
    with pytest.raises(ValueError):
        Tokenizer(mode="external-vocab", vocab=[])
    with pytest.raises(ValueError):
        Tokenizer(mode="bogus")


# --- selection -----------------------------------------------------------------


def _records(rng, n, entropy=None):
    out = []
    for i in range(n):
        out.append(
            SelectionRecord(
                id=f"id-{i:06d}",
                entropy_nats=rng.uniform(0, 6) if entropy is None else entropy,
                token_count=rng.randint(1, 500),
            )
        )
    return out


def test_top_n_larger_than_stream_returns_sorted_all():
    rng = random.Random(0)
    records = _records(rng, 10)
    result = select_top_n(iter(records), 50)
    assert len(result) == 10
    assert result == sorted(records, key=lambda r: (-r.entropy_nats, r.id))


def test_pool_halving_matches_full_sort():
    # 50 -> 25 mirrors the production-scale halving.
    rng = random.Random(1)
    records = _records(rng, 50)
    result = select_top_n(iter(records), 25)
    expected = sorted(records, key=lambda r: (-r.entropy_nats, r.id))[:25]
    assert result == expected


def test_streaming_matches_full_sort_oracle_10k():
    rng = random.Random(2)
    records = _records(rng, 10_000)
    result = select_top_n(iter(records), 1_000)
    oracle = sorted(records, key=lambda r: (-r.entropy_nats, r.id))[:1_000]
    assert [r.id for r in result] == [r.id for r in oracle]


def test_monotone_in_n():
    rng = random.Random(3)
    records = _records(rng, 300)
    previous: set[str] = set()
    for n in (1, 5, 50, 120, 300):
        ids = {r.id for r in select_top_n(iter(records), n)}
        assert previous <= ids
        previous = ids


def test_ties_break_by_ascending_id():
    rng = random.Random(4)
    records = _records(rng, 40, entropy=1.5)
    result = select_top_n(iter(records), 10)
    assert [r.id for r in result] == sorted(r.id for r in records)[:10]


def test_parallel_shard_merge_equals_single_stream():
    rng = random.Random(5)
    records = _records(rng, 5_000)
    single = select_top_n(iter(records), 400)
    shards = [records[i::8] for i in range(8)]
    partials = [select_top_n(iter(s), 400) for s in shards]
    merged = select_top_n((r for part in partials for r in part), 400)
    assert merged == single


def test_selection_record_json_round_trip():
    record = SelectionRecord(id="x", entropy_nats=1.25, token_count=7)
    assert selection_from_json(selection_to_json(record)) == record


def test_select_rejects_bad_n():
    with pytest.raises(ValueError):
        select_top_n(iter([]), 0)
