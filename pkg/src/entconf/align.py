"""Word alignment against references and correctness labeling."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

from .words import WordScore


class EditOp(str, enum.Enum):
    MATCH = "match"
    SUB = "sub"
    INS = "ins"
    DEL = "del"


class Label(str, enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"


class ErrorKind(str, enum.Enum):
    NONE = "none"
    SUBSTITUTION = "substitution"
    INSERTION = "insertion"


@dataclass(frozen=True)
class AlignStep:
    op: EditOp
    hyp_index: Optional[int]
    ref_index: Optional[int]


@dataclass(frozen=True)
class LabeledScore:
    utterance_id: str
    word: str
    confidence: float
    label: Label
    error_kind: ErrorKind

    @property
    def correct(self) -> bool:
        return self.label is Label.CORRECT


@dataclass
class AlignmentSummary:
    matches: int = 0
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    ref_words: int = 0
    duration: Optional[float] = None

    @property
    def wer(self) -> Optional[float]:
        if self.ref_words == 0:
            return None
        return (self.substitutions + self.insertions + self.deletions) / self.ref_words

    @property
    def wis(self) -> Optional[float]:
        """Word insertions per second, when the audio duration is known."""
        if not self.duration:
            return None
        return self.insertions / self.duration

    def add(self, other: "AlignmentSummary") -> "AlignmentSummary":
        if self.duration is None or other.duration is None:
            duration = None
        else:
            duration = self.duration + other.duration
        return AlignmentSummary(
            self.matches + other.matches,
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.ref_words + other.ref_words,
            duration,
        )

    def to_dict(self) -> dict:
        return {
            "matches": self.matches,
            "substitutions": self.substitutions,
            "insertions": self.insertions,
            "deletions": self.deletions,
            "ref_words": self.ref_words,
            "wer": self.wer,
            "duration": self.duration,
            "wis": self.wis,
        }


def normalize_words(words: Sequence[str] | str, lowercase: bool = True) -> list[str]:
    """Lowercase and re-split on whitespace; punctuation is left alone."""
    text = words if isinstance(words, str) else " ".join(words)
    if lowercase:
        text = text.lower()
    return text.split()


def align(hyp: Sequence[str], ref: Sequence[str]) -> list[AlignStep]:
    """Unit-cost minimum edit script turning ``ref`` into ``hyp``.

    On backtrace ties the preference is match, substitution, insertion,
    deletion, which makes the script fully deterministic.
    """
    n, m = len(hyp), len(ref)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        h = hyp[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if h == ref[j - 1] else 1)
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)

    script: list[AlignStep] = []
    i, j = n, m
    while i > 0 or j > 0:
        cur = dist[i][j]
        if i > 0 and j > 0:
            same = hyp[i - 1] == ref[j - 1]
            if same and cur == dist[i - 1][j - 1]:
                script.append(AlignStep(EditOp.MATCH, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
            if not same and cur == dist[i - 1][j - 1] + 1:
                script.append(AlignStep(EditOp.SUB, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and cur == dist[i - 1][j] + 1:
            script.append(AlignStep(EditOp.INS, i - 1, None))
            i -= 1
        else:
            script.append(AlignStep(EditOp.DEL, None, j - 1))
            j -= 1
    script.reverse()
    return script


def edit_distance(script: Sequence[AlignStep]) -> int:
    return sum(step.op is not EditOp.MATCH for step in script)


def summarize(script: Sequence[AlignStep], duration: Optional[float] = None) -> AlignmentSummary:
    counts = {op: 0 for op in EditOp}
    for step in script:
        counts[step.op] += 1
    ref_words = counts[EditOp.MATCH] + counts[EditOp.SUB] + counts[EditOp.DEL]
    return AlignmentSummary(
        counts[EditOp.MATCH], counts[EditOp.SUB], counts[EditOp.INS], counts[EditOp.DEL], ref_words, duration
    )


def label_words(
    words: Sequence[WordScore], script: Sequence[AlignStep], utterance_id: str = ""
) -> list[LabeledScore]:
    """One labeled score per hypothesis word; deletions are dropped."""
    emitted = [s for s in script if s.op is not EditOp.DEL]
    if len(emitted) != len(words) or any(s.hyp_index != k for k, s in enumerate(emitted)):
        raise ValueError(
            f"alignment covers {len(emitted)} hypothesis words but {len(words)} were given"
        )
    out = []
    for word, step in zip(words, emitted):
        if step.op is EditOp.MATCH:
            label, kind = Label.CORRECT, ErrorKind.NONE
        elif step.op is EditOp.SUB:
            label, kind = Label.INCORRECT, ErrorKind.SUBSTITUTION
        else:
            label, kind = Label.INCORRECT, ErrorKind.INSERTION
        out.append(LabeledScore(utterance_id, word.surface, word.confidence, label, kind))
    return out
