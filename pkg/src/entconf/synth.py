"""Synthetic posterior streams with known errors, plus brute-force oracles.

The generator builds a toy wordpiece vocabulary, draws reference sentences,
injects substitutions, insertions and deletions into the hypothesis, and
renders the hypothesis as a greedy CTC or RNN-T posterior stream. Every step
distribution is ``softmax(sharpness * logits)`` where the emitted token's
logit sits ``gap`` above the largest of ``V - 1`` standard normal noise
logits, so the stream always decodes to the intended hypothesis.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import softmax

from .decode import DecodeMode, Token, Utterance, Vocab, unit_spans

SYLLABLES = [a + b for a, b in itertools.product(string.ascii_lowercase, repeat=2)]


@dataclass
class SynthConfig:
    vocab_size: int = 128
    blank_id: int = 0
    n_utterances: int = 2000
    words_per_utterance: int = 10
    # Relative weights for words of 1, 2, 3, ... units.
    units_per_word: tuple[float, ...] = (0.35, 0.3, 0.2, 0.1, 0.05)
    error_rate: float = 0.06
    # Share of injected errors that are substitutions, insertions, deletions.
    error_mix: tuple[float, float, float] = (0.7, 0.2, 0.1)
    sharpness: float = 5.0
    correct_gap: float = 4.0
    incorrect_gap: float = 3.0
    blank_gap: float = 4.0
    gap_jitter: float = 1.5
    # Scale of the competitor logits; a smaller scale spreads the tail mass
    # more evenly, which is what makes an error step "flatter".
    correct_noise: float = 1.0
    incorrect_noise: float = 0.5
    mode: DecodeMode = DecodeMode.CTC
    max_repeat: int = 2
    max_blank_run: int = 1
    lexicon_size: int = 400
    pure_noise: bool = False
    frame_seconds: float = 0.04
    seed: int = 0

    def __post_init__(self):
        self.mode = DecodeMode(self.mode)
        self.units_per_word = tuple(float(w) for w in self.units_per_word)
        self.error_mix = tuple(float(w) for w in self.error_mix)
        self.validate()

    def validate(self):
        if self.vocab_size < 4:
            raise ValueError("vocab_size must be >= 4")
        if not 0 <= self.blank_id < self.vocab_size:
            raise ValueError("blank_id outside the vocabulary")
        if self.n_utterances < 0 or self.words_per_utterance < 1:
            raise ValueError("n_utterances must be >= 0 and words_per_utterance >= 1")
        if not 0.0 <= self.error_rate < 1.0:
            raise ValueError("error_rate must be in [0, 1)")
        if self.sharpness <= 0:
            raise ValueError("sharpness must be positive")
        if min(self.correct_gap, self.incorrect_gap, self.blank_gap) <= 0:
            raise ValueError("gaps must be positive")
        if not self.units_per_word or min(self.units_per_word) < 0 or sum(self.units_per_word) <= 0:
            raise ValueError("units_per_word must be non-negative weights with a positive sum")
        if len(self.error_mix) != 3 or min(self.error_mix) < 0 or sum(self.error_mix) <= 0:
            raise ValueError("error_mix must be three non-negative weights")
        if self.max_repeat < 1 or self.max_blank_run < 0:
            raise ValueError("max_repeat must be >= 1 and max_blank_run >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["units_per_word"] = list(self.units_per_word)
        d["error_mix"] = list(self.error_mix)
        return d


def overconfident_preset(seed: int = 0, **overrides) -> SynthConfig:
    """Desk-scale preset whose incorrect words have median max-probability above 0.9."""
    params = dict(
        vocab_size=128, n_utterances=2000, words_per_utterance=10, error_rate=0.06, seed=seed
    )
    params.update(overrides)
    return SynthConfig(**params)


@lru_cache(maxsize=32)
def build_vocab(vocab_size: int, blank_id: int = 0) -> Vocab:
    """Toy wordpiece vocabulary: half word-begin pieces ``▁xy``, half continuations ``xy``.

    Every piece has exactly two letters, so word surfaces map back to a
    unique token sequence.
    """
    tokens = []
    pieces = iter(SYLLABLES)
    n_begin = (vocab_size - 1 + 1) // 2
    k = 0
    for tid in range(vocab_size):
        if tid == blank_id:
            tokens.append(Token(tid, "<blank>", False))
            continue
        begin = k < n_begin
        text = next(pieces)
        tokens.append(Token(tid, ("▁" + text) if begin else text, begin))
        k += 1
    return Vocab(vocab_size, blank_id, tokens)


def _token_groups(vocab: Vocab) -> tuple[np.ndarray, np.ndarray]:
    begin = np.array([t.id for t in vocab.tokens if t.word_begin])
    cont = np.array([t.id for t in vocab.tokens if not t.word_begin and t.id != vocab.blank_id])
    return begin, cont


def _surface(vocab: Vocab, ids: Sequence[int]) -> str:
    return "".join(vocab.text(t).lstrip("▁") for t in ids)


def _lexicon(cfg: SynthConfig, vocab: Vocab) -> list[tuple[int, ...]]:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2**31,)))
    begin, cont = _token_groups(vocab)
    weights = np.asarray(cfg.units_per_word) / sum(cfg.units_per_word)
    words: set[tuple[int, ...]] = set()
    out = []
    attempts = 0
    while len(out) < cfg.lexicon_size and attempts < 100 * cfg.lexicon_size:
        attempts += 1
        n_units = 1 + int(rng.choice(len(weights), p=weights))
        word = (int(rng.choice(begin)),) + tuple(int(t) for t in rng.choice(cont, size=n_units - 1))
        if word not in words:
            words.add(word)
            out.append(word)
    return out


def _corrupt(word: tuple[int, ...], rng: np.random.Generator, begin, cont) -> tuple[tuple[int, ...], int]:
    """Replace one unit of a word with a different piece of the same kind.

    Returns the new word and the position of the replaced unit.
    """
    pos = int(rng.integers(len(word)))
    pool = begin if pos == 0 else cont
    choice = int(rng.choice(pool))
    while choice == word[pos]:
        choice = int(rng.choice(pool))
    return word[:pos] + (choice,) + word[pos + 1 :], pos


def _render(
    rng: np.random.Generator, cfg: SynthConfig, units: list[tuple[int, bool]]
) -> np.ndarray:
    """Posterior stream for ``(token, correct)`` units in emission order."""
    layout: list[tuple[int, bool]] = []  # one entry per step; blanks count as correct
    blank = cfg.blank_id

    def blanks():
        layout.extend([(blank, True)] * int(rng.integers(0, cfg.max_blank_run + 1)))

    blanks()
    prev = None
    for token, ok in units:
        if cfg.mode is DecodeMode.CTC:
            start = len(layout)
            blanks()
            if token == prev and len(layout) == start:
                layout.append((blank, True))
            layout.extend([(token, ok)] * int(rng.integers(1, cfg.max_repeat + 1)))
        else:
            layout.append((token, ok))
            blanks()
        prev = token
    if cfg.mode is DecodeMode.CTC:
        blanks()
    if not layout:
        return np.zeros((0, cfg.vocab_size))

    tokens = np.array([t for t, _ in layout])
    ok = np.array([o for _, o in layout])
    is_blank = tokens == blank
    rows = np.arange(tokens.size)
    scale = np.where(ok, cfg.correct_noise, cfg.incorrect_noise)
    gap = np.where(is_blank, cfg.blank_gap, np.where(ok, cfg.correct_gap, cfg.incorrect_gap))
    jitter = cfg.gap_jitter * np.abs(rng.standard_normal(tokens.size))
    logits = scale[:, None] * rng.standard_normal((tokens.size, cfg.vocab_size))
    logits[rows, tokens] = -np.inf
    logits[rows, tokens] = logits.max(axis=1) + np.maximum(gap - jitter, 0.05)
    return softmax(cfg.sharpness * logits, axis=1)


def generate_utterance(cfg: SynthConfig, index: int, lexicon=None) -> tuple[Utterance, list[str]]:
    """One utterance and its reference words; depends only on ``(seed, index)``."""
    vocab = build_vocab(cfg.vocab_size, cfg.blank_id)
    if lexicon is None:
        lexicon = _lexicon(cfg, vocab)
    begin, cont = _token_groups(vocab)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
    mix = np.asarray(cfg.error_mix) / sum(cfg.error_mix)

    ref = [lexicon[int(i)] for i in rng.integers(len(lexicon), size=cfg.words_per_utterance)]
    # (token, unit is correct) in emission order
    units: list[tuple[int, bool]] = []
    if cfg.pure_noise:
        for i in rng.integers(len(lexicon), size=cfg.words_per_utterance):
            units.extend((t, False) for t in lexicon[int(i)])
        ref = []
    else:
        for word in ref:
            if rng.random() >= cfg.error_rate:
                units.extend((t, True) for t in word)
                continue
            kind = int(rng.choice(3, p=mix))
            if kind == 0:
                wrong, pos = _corrupt(word, rng, begin, cont)
                units.extend((t, k != pos) for k, t in enumerate(wrong))
            elif kind == 1:
                units.extend((t, True) for t in word)
                units.extend((t, False) for t in lexicon[int(rng.integers(len(lexicon)))])
            # kind == 2: deletion, nothing emitted

    steps = _render(rng, cfg, units)
    utt = Utterance(f"utt{index:06d}", steps, duration=round(steps.shape[0] * cfg.frame_seconds, 6))
    return utt, [_surface(vocab, w) for w in ref]


def generate(cfg: SynthConfig, indices: Optional[Sequence[int]] = None):
    """Generate ``(utterances, references, vocab)``.

    ``references`` maps utterance id to its list of reference words. Any
    subset of indices can be generated independently and yields the same
    utterances as a full run.
    """
    vocab = build_vocab(cfg.vocab_size, cfg.blank_id)
    lexicon = _lexicon(cfg, vocab)
    if indices is None:
        indices = range(cfg.n_utterances)
    utts, refs = [], {}
    for i in indices:
        utt, ref = generate_utterance(cfg, i, lexicon)
        utts.append(utt)
        refs[utt.id] = ref
    return utts, refs, vocab


def oracle_auc_roc(conf: Sequence[float], correct: Sequence[bool]) -> float:
    """Pairwise AUC_ROC: wins plus half ties over every (correct, incorrect) pair."""
    pos = [c for c, ok in zip(conf, correct) if ok]
    neg = [c for c, ok in zip(conf, correct) if not ok]
    if not pos or not neg:
        raise ValueError("oracle AUC_ROC needs both classes")
    doubled = 0
    for a in pos:
        for b in neg:
            doubled += 2 if a > b else 1 if a == b else 0
    return doubled / (2 * len(pos) * len(neg))


def oracle_levenshtein(hyp: Sequence, ref: Sequence) -> int:
    """Plain recursive edit distance; exponential, so lengths are capped at 12."""
    if len(hyp) > 12 or len(ref) > 12:
        raise ValueError("oracle_levenshtein only accepts sequences of length <= 12")
    hyp, ref = tuple(hyp), tuple(ref)

    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            rec(i - 1, j) + 1,
            rec(i, j - 1) + 1,
            rec(i - 1, j - 1) + (hyp[i - 1] != ref[j - 1]),
        )

    return rec(len(hyp), len(ref))


def oracle_youden_grid(conf: Sequence[float], correct: Sequence[bool], n_grid: int = 100_001):
    """Youden statistics from J(tau) sampled on a uniform grid over [0, 1]."""
    conf = np.asarray(conf, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    taus = np.linspace(0.0, 1.0, n_grid)
    pos = np.sort(conf[correct])
    neg = np.sort(conf[~correct])
    fnr = np.searchsorted(pos, taus, side="left") / pos.size
    tnr = np.searchsorted(neg, taus, side="left") / neg.size
    j = tnr - fnr
    area = float(np.mean(j))
    std = float(np.sqrt(max(np.mean(j * j) - area**2, 0.0)))
    return area, float(np.max(j)), std


def incorrect_step_max_probs(utts: Sequence[Utterance], refs: dict, vocab: Vocab, mode: DecodeMode) -> np.ndarray:
    """Raw max-probabilities of every non-blank step that belongs to an incorrect word."""
    from .align import Label, align, label_words
    from .words import WordScore, detokenize

    out = []
    for utt in utts:
        if not utt.steps.size:
            continue
        spans = unit_spans(np.argmax(utt.steps, axis=1), vocab.blank_id, mode)
        surfaces = detokenize([s[0] for s in spans], vocab)
        labels = label_words([WordScore(w, [], 0.0) for w in surfaces], align(surfaces, refs[utt.id]))
        word = -1
        for tid, first, last in spans:
            if vocab.word_begin(tid) or word < 0:
                word += 1
            if labels[word].label is Label.INCORRECT:
                out.extend(utt.steps[first : last + 1].max(axis=1).tolist())
    return np.asarray(out)
