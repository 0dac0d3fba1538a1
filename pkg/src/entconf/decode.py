"""Greedy decoding of posterior streams into scored units.

A stream is a ``(T, V)`` array of per-step distributions. CTC streams merge
repeated argmax tokens into one unit; RNN-T streams treat every non-blank
step as its own unit. Blank steps never become units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .measures import MeasureConfig, confidence, validate


class DecodeMode(str, enum.Enum):
    CTC = "ctc"
    RNNT = "rnnt"


class BlankPolicy(str, enum.Enum):
    EXCLUDE = "exclude"
    INCLUDE = "include"


class AggKind(str, enum.Enum):
    MEAN = "mean"
    MIN = "min"
    PROD = "prod"


def aggregate(values: Sequence[float], agg: AggKind) -> float:
    """Arithmetic mean, minimum or product of a non-empty list of scores."""
    # Units and words hold a handful of values; plain Python beats numpy here.
    values = [float(v) for v in values]
    if not values:
        raise ValueError("cannot aggregate an empty list of confidences")
    agg = AggKind(agg)
    if agg is AggKind.MEAN:
        out = math.fsum(values) / len(values)
    elif agg is AggKind.MIN:
        out = min(values)
    else:
        out = math.prod(values)
    return min(max(out, 0.0), 1.0)


@dataclass(frozen=True)
class Token:
    id: int
    text: str
    word_begin: bool


@dataclass
class Vocab:
    """Token inventory with a designated blank id."""

    size: int
    blank_id: int
    tokens: list[Token] = field(default_factory=list)

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"vocabulary size must be >= 2, got {self.size}")
        if not 0 <= self.blank_id < self.size:
            raise ValueError(f"blank_id {self.blank_id} outside [0, {self.size})")
        if len(self.tokens) != self.size:
            raise ValueError(f"expected {self.size} tokens, got {len(self.tokens)}")
        for i, tok in enumerate(self.tokens):
            if tok.id != i:
                raise ValueError(f"token ids must be dense 0..V-1; position {i} has id {tok.id}")
        if self.tokens[self.blank_id].word_begin:
            raise ValueError("the blank token cannot start a word")

    @classmethod
    def from_dict(cls, data: dict) -> "Vocab":
        tokens = sorted(
            (Token(int(t["id"]), str(t["text"]), bool(t.get("word_begin", False))) for t in data["tokens"]),
            key=lambda t: t.id,
        )
        return cls(size=int(data["size"]), blank_id=int(data["blank_id"]), tokens=tokens)

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "blank_id": self.blank_id,
            "tokens": [{"id": t.id, "text": t.text, "word_begin": t.word_begin} for t in self.tokens],
        }

    def text(self, token_id: int) -> str:
        return self.tokens[token_id].text

    def word_begin(self, token_id: int) -> bool:
        return self.tokens[token_id].word_begin


@dataclass
class Utterance:
    """One posterior stream: ``steps`` is a ``(T, V)`` array."""

    id: str
    steps: np.ndarray
    duration: Optional[float] = None


@dataclass
class UnitScore:
    token_id: int
    frame_span: tuple[int, int]
    frame_confidences: list[float]
    unit_confidence: float


def greedy_argmax(probs: np.ndarray) -> np.ndarray | int:
    """Index of the largest probability; ties go to the lowest index."""
    p = np.asarray(probs)
    out = np.argmax(p, axis=-1)
    return int(out) if p.ndim == 1 else out


def greedy_tokens(tokens: Sequence[int], blank_id: int, mode: DecodeMode) -> list[int]:
    """Collapse an argmax token sequence into the greedy transcript."""
    out = []
    prev = None
    for tok in tokens:
        tok = int(tok)
        if tok != blank_id and (mode is DecodeMode.RNNT or tok != prev):
            out.append(tok)
        prev = tok
    return out


def unit_spans(tokens: np.ndarray, blank_id: int, mode: DecodeMode) -> list[tuple[int, int, int]]:
    """``(token_id, first_step, last_step)`` for every non-blank unit."""
    spans: list[tuple[int, int, int]] = []
    prev = None
    for t, tok in enumerate(tokens.tolist()):
        if tok == blank_id:
            prev = tok
            continue
        if mode is DecodeMode.CTC and tok == prev:
            tid, first, _ = spans[-1]
            spans[-1] = (tid, first, t)
        else:
            spans.append((tok, t, t))
        prev = tok
    return spans


def collapse_stream(
    steps,
    vocab: Vocab,
    mode: DecodeMode,
    cfg: MeasureConfig,
    unit_agg: AggKind,
    blank: BlankPolicy = BlankPolicy.EXCLUDE,
    *,
    step_confidences: Optional[np.ndarray] = None,
    check: bool = True,
) -> list[UnitScore]:
    """Turn a posterior stream into scored units.

    Args:
        steps: ``(T, V)`` array of per-step distributions; ``T`` may be 0.
        vocab: vocabulary; its size must match ``V``.
        mode: CTC merges repeated argmax steps, RNN-T does not.
        cfg: per-step confidence measure.
        unit_agg: how the step confidences of one unit are combined.
        blank: with ``INCLUDE`` every blank step is attributed to the
            preceding unit (leading blanks to the first unit), so its
            confidence takes part in the aggregation.
        step_confidences: precomputed ``cfg`` confidences for ``steps``;
            lets callers sweep aggregations without re-evaluating the measure.
    """
    mode = DecodeMode(mode)
    blank = BlankPolicy(blank)
    probs = np.asarray(steps, dtype=np.float64)
    if probs.size == 0:
        return []
    if probs.ndim != 2:
        raise ValueError(f"stream must be a 2-D array, got shape {probs.shape}")
    if probs.shape[1] != vocab.size:
        raise ValueError(f"step width {probs.shape[1]} does not match vocabulary size {vocab.size}")
    if check:
        validate(probs)
    tokens = np.argmax(probs, axis=1)
    spans = unit_spans(tokens, vocab.blank_id, mode)
    if not spans:
        return []
    if step_confidences is None:
        step_confidences = np.atleast_1d(confidence(probs, cfg, check=False))
    step_confidences = np.asarray(step_confidences, dtype=np.float64)

    if blank is BlankPolicy.INCLUDE:
        # Stretch each unit over the blanks that follow it.
        bounds = [first for _, first, _ in spans[1:]] + [len(tokens)]
        spans = [(tid, first if i else 0, bounds[i] - 1) for i, (tid, first, _) in enumerate(spans)]

    units = []
    for tid, first, last in spans:
        frame_conf = step_confidences[first : last + 1].tolist()
        units.append(UnitScore(tid, (first, last), frame_conf, aggregate(frame_conf, unit_agg)))
    return units
