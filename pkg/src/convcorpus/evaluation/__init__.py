"""Summarization evaluation: task prompts, ROUGE, and the pairwise judge."""

from .judge import (  # noqa: F401
    HttpJudgeClient,
    JudgePair,
    WinRates,
    assign_positions,
    build_judge_prompt,
    judge_pair,
    judge_pairs,
    win_rates,
)
from .prompts import BUILTIN_TEMPLATES, PromptTemplate, load_templates, render_prompt  # noqa: F401
from .rouge import RougeScore, rouge  # noqa: F401
