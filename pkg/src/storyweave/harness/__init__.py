"""Replay, synthetic corpora, evaluation and the command line."""
