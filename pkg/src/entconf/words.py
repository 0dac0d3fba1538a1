"""Grouping of scored units into words."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .decode import AggKind, UnitScore, Vocab, aggregate

WORD_MARKER = "▁"

__all__ = ["AggKind", "WordScore", "aggregate", "build_words", "detokenize"]


@dataclass
class WordScore:
    surface: str
    unit_ids: list[int]
    confidence: float
    implicit_head: bool = False


def _piece(vocab: Vocab, token_id: int) -> str:
    text = vocab.text(token_id)
    if vocab.word_begin(token_id) and text.startswith(WORD_MARKER):
        return text[len(WORD_MARKER):]
    return text


def detokenize(token_ids: Sequence[int], vocab: Vocab) -> list[str]:
    """Split a token sequence into word surfaces at word-begin tokens."""
    words: list[str] = []
    for tid in token_ids:
        if vocab.word_begin(tid) or not words:
            words.append(_piece(vocab, tid))
        else:
            words[-1] += _piece(vocab, tid)
    return words


def build_words(units: Sequence[UnitScore], vocab: Vocab, agg: AggKind) -> list[WordScore]:
    """Partition units at word-begin tokens and aggregate their confidences.

    A leading unit without the word-begin flag still opens a word; that word
    is marked ``implicit_head`` so callers can count degenerate decodes.
    """
    groups: list[list[UnitScore]] = []
    implicit = False
    for unit in units:
        if vocab.word_begin(unit.token_id) or not groups:
            if not groups and not vocab.word_begin(unit.token_id):
                implicit = True
            groups.append([unit])
        else:
            groups[-1].append(unit)

    words = []
    for i, group in enumerate(groups):
        ids = [u.token_id for u in group]
        words.append(
            WordScore(
                surface="".join(_piece(vocab, t) for t in ids),
                unit_ids=ids,
                confidence=aggregate([u.unit_confidence for u in group], agg),
                implicit_head=implicit and i == 0,
            )
        )
    return words
