"""Corpus curation and evaluation toolkit for conversation transcripts.

Pipeline: filter -> score -> select -> anonymize -> augment -> mix -> pack,
plus a summarization evaluation harness (ROUGE and a pairwise LLM judge).
"""

__version__ = "0.1.0"
