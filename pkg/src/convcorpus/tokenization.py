"""Tokenizers shared by scoring, mixing, packing, and ROUGE.

Two modes:

* ``word`` — lowercase the text and take maximal alphanumeric runs.
  Zero-dependency default.
* ``external-vocab`` — greedy longest-match against a supplied vocabulary
  (one entry per line); characters that start no vocabulary entry come
  through as single-character tokens, so tokenization always terminates
  and never drops input.
"""

from __future__ import annotations

import re
from pathlib import Path

MODES = ("word", "external-vocab")

# Maximal alphanumeric runs, unicode-aware; underscore is not alphanumeric.
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def word_tokens(text: str) -> list[str]:
    """Lowercased tokens split on non-alphanumeric runs."""
    return _WORD_RE.findall(text.lower())


class Tokenizer:
    """Deterministic text tokenizer with a fixed mode."""

    def __init__(self, mode: str = "word", vocab: list[str] | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown tokenizer mode {mode!r}; expected one of {MODES}")
        self.mode = mode
        if mode == "external-vocab":
            entries = [v for v in (vocab or []) if v]
            if not entries:
                raise ValueError("external-vocab mode requires a nonempty vocabulary")
            self._vocab = frozenset(entries)
            self._max_len = max(len(v) for v in self._vocab)
        else:
            self._vocab = frozenset()
            self._max_len = 0

    @classmethod
    def from_vocab_file(cls, path: str | Path) -> "Tokenizer":
        with open(path, "r", encoding="utf-8") as fh:
            vocab = [line.rstrip("\n") for line in fh]
        return cls(mode="external-vocab", vocab=vocab)

    def tokenize(self, text: str) -> list[str]:
        if self.mode == "word":
            return word_tokens(text)
        return self._tokenize_vocab(text)

    def count(self, text: str) -> int:
        return len(self.tokenize(text))

    def _tokenize_vocab(self, text: str) -> list[str]:
        tokens: list[str] = []
        i, n = 0, len(text)
        while i < n:
            match = None
            for length in range(min(self._max_len, n - i), 0, -1):
                candidate = text[i : i + length]
                if candidate in self._vocab:
                    match = candidate
                    break
            if match is None:
                match = text[i]
            tokens.append(match)
            i += len(match)
        return tokens
