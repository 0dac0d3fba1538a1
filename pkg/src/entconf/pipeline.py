"""End-to-end evaluation: decode, build words, align, label, score.

Per-utterance work is independent and may run in worker processes; results
are merged in utterance-id order before any metric is computed, so the
degree of parallelism never changes a reported number.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as fio
from .align import (
    AlignmentSummary,
    ErrorKind,
    Label,
    LabeledScore,
    align,
    label_words,
    normalize_words,
    summarize,
)
from .decode import AggKind, BlankPolicy, DecodeMode, Utterance, Vocab, collapse_stream, unit_spans
from .measures import (
    DEFAULT_ALPHAS,
    RECOMMENDED,
    MeasureConfig,
    MeasureKind,
    Normalization,
    confidence,
    renormalize,
    validate,
)
from .metrics import CurveReport, UndefinedMetricError, evaluate, tnr_transfer
from .words import build_words, detokenize



def default_measures(alphas: Sequence[float] = DEFAULT_ALPHAS) -> list[MeasureConfig]:
    """Max-probability, both Gibbs variants, and Tsallis/Renyi at every alpha."""
    out = [
        MeasureConfig(MeasureKind.MAX_PROB),
        MeasureConfig(MeasureKind.GIBBS, Normalization.LINEAR),
        MeasureConfig(MeasureKind.GIBBS, Normalization.EXPONENTIAL),
    ]
    for kind in (MeasureKind.TSALLIS, MeasureKind.RENYI):
        for norm in (Normalization.LINEAR, Normalization.EXPONENTIAL):
            out.extend(MeasureConfig(kind, norm, a) for a in alphas)
    return out


@dataclass
class RunConfig:
    mode: DecodeMode = DecodeMode.CTC
    measures: list[MeasureConfig] = field(default_factory=default_measures)
    aggregations: list[AggKind] = field(default_factory=lambda: list(AggKind))
    blank: BlankPolicy = BlankPolicy.EXCLUDE
    ece_bins: int = 10
    hist_bins: int = 20
    fnr_budget: float = 0.05
    normalize_text: bool = True
    renormalize: bool = False
    include_recommended: bool = True

    def __post_init__(self):
        self.mode = DecodeMode(self.mode)
        self.blank = BlankPolicy(self.blank)
        self.aggregations = [AggKind(a) for a in self.aggregations]
        self.measures = list(dict.fromkeys(self.measures))
        self.aggregations = list(dict.fromkeys(self.aggregations))
        if not self.measures or not self.aggregations:
            raise ValueError("at least one measure and one aggregation are required")
        if self.ece_bins < 1 or self.hist_bins < 1:
            raise ValueError("bin counts must be positive")
        if not 0.0 < self.fnr_budget < 1.0:
            raise ValueError("fnr_budget must be in (0, 1)")

    def pairs(self) -> list[tuple[MeasureConfig, AggKind]]:
        """Every (measure, aggregation) pair, plus the recommended one if requested."""
        out = [(m, a) for m in self.measures for a in self.aggregations]
        if self.include_recommended and (RECOMMENDED, AggKind.MIN) not in out:
            out.append((RECOMMENDED, AggKind.MIN))
        return out

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "measures": [m.to_dict() for m in self.measures],
            "aggregations": [a.value for a in self.aggregations],
            "blank": self.blank.value,
            "ece_bins": self.ece_bins,
            "hist_bins": self.hist_bins,
            "fnr_budget": self.fnr_budget,
            "normalize_text": self.normalize_text,
            "renormalize": self.renormalize,
            "include_recommended": self.include_recommended,
        }


def pair_label(measure: MeasureConfig, agg: AggKind) -> str:
    return f"{measure.label}__{agg.value}"


@dataclass
class UtteranceResult:
    utterance_id: str
    words: list[str]
    labels: list[Label]
    kinds: list[ErrorKind]
    # conf[k][i]: confidence of word i under the k-th (measure, aggregation) pair.
    conf: np.ndarray
    summary: AlignmentSummary
    implicit_heads: int = 0


def score_utterance(
    utt: Utterance,
    ref: Sequence[str],
    vocab: Vocab,
    cfg: RunConfig,
    pairs: Sequence[tuple[MeasureConfig, AggKind]],
) -> UtteranceResult:
    """Decode one utterance under every configuration and label its words."""
    probs = utt.steps
    if probs.size and probs.shape[1] != vocab.size:
        raise fio.SchemaError(
            f"utterance {utt.id}: step width {probs.shape[1]} does not match vocabulary size {vocab.size}"
        )
    if probs.size:
        probs = renormalize(probs) if cfg.renormalize else probs
        try:
            validate(probs)
        except ValueError as exc:
            raise fio.SchemaError(f"utterance {utt.id}: {exc}") from exc
        tokens = np.argmax(probs, axis=1)
        spans = unit_spans(tokens, vocab.blank_id, cfg.mode)
    else:
        spans = []

    surfaces = detokenize([s[0] for s in spans], vocab)
    implicit = int(bool(spans) and not vocab.word_begin(spans[0][0]))

    hyp_norm = [" ".join(normalize_words(w, cfg.normalize_text)) for w in surfaces]
    ref_norm = normalize_words(list(ref), cfg.normalize_text)
    script = align(hyp_norm, ref_norm)

    conf = np.zeros((len(pairs), len(surfaces)))
    step_cache: dict[MeasureConfig, np.ndarray] = {}
    labeled: list[LabeledScore] = []
    for k, (measure, agg) in enumerate(pairs):
        if not surfaces:
            break
        if measure not in step_cache:
            step_cache[measure] = np.atleast_1d(confidence(probs, measure, check=False))
        units = collapse_stream(
            probs, vocab, cfg.mode, measure, agg, cfg.blank,
            step_confidences=step_cache[measure], check=False,
        )
        words = build_words(units, vocab, agg)
        conf[k] = [w.confidence for w in words]
        if k == 0:
            labeled = label_words(words, script, utt.id)
    if not surfaces:
        labeled = label_words([], script, utt.id)

    return UtteranceResult(
        utterance_id=utt.id,
        words=surfaces,
        labels=[s.label for s in labeled],
        kinds=[s.error_kind for s in labeled],
        conf=conf,
        summary=summarize(script, utt.duration),
        implicit_heads=implicit,
    )


def _score_job(args):
    return score_utterance(*args)


def score_corpus(
    utts: Sequence[Utterance],
    refs: dict[str, list[str]],
    vocab: Vocab,
    cfg: RunConfig,
    jobs: int = 1,
) -> list[UtteranceResult]:
    """Score every utterance; the result is sorted by utterance id."""
    ids = [u.id for u in utts]
    if len(set(ids)) != len(ids):
        raise fio.SchemaError("duplicate utterance ids in posterior input")
    missing = sorted(set(ids) - set(refs))
    if missing:
        raise fio.SchemaError(f"no reference for utterance(s): {', '.join(missing[:5])}")
    extra = sorted(set(refs) - set(ids))
    if extra:
        raise fio.SchemaError(f"reference(s) without posteriors: {', '.join(extra[:5])}")

    pairs = cfg.pairs()
    tasks = [(u, refs[u.id], vocab, cfg, pairs) for u in utts]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [score_utterance(*t) for t in tasks]
    results.sort(key=lambda r: r.utterance_id)
    return results


@dataclass
class PairResult:
    measure: MeasureConfig
    aggregation: AggKind
    report: CurveReport
    scores: list[LabeledScore]

    @property
    def label(self) -> str:
        return pair_label(self.measure, self.aggregation)


@dataclass
class EvalResult:
    config: RunConfig
    pairs: list[PairResult]
    alignment: AlignmentSummary
    warnings: list[str]

    def all_undefined(self) -> bool:
        return all(not p.report.defined() for p in self.pairs)

    def pair(self, measure: MeasureConfig, agg: AggKind) -> PairResult:
        for p in self.pairs:
            if p.measure == measure and p.aggregation == agg:
                return p
        raise KeyError(pair_label(measure, agg))


def labeled_scores(results: Sequence[UtteranceResult], k: int) -> list[LabeledScore]:
    out = []
    for r in results:
        for i, word in enumerate(r.words):
            out.append(LabeledScore(r.utterance_id, word, float(r.conf[k][i]), r.labels[i], r.kinds[i]))
    return out


def merge_arrays(results: Sequence[UtteranceResult], k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(confidences, is_correct)`` for the k-th pair without building word objects."""
    if not results:
        return np.zeros(0), np.zeros(0, dtype=bool)
    conf = np.concatenate([r.conf[k] for r in results])
    correct = np.array([lab is Label.CORRECT for r in results for lab in r.labels], dtype=bool)
    return conf, correct


def _corpus_summary(results: Sequence[UtteranceResult]) -> AlignmentSummary:
    total = AlignmentSummary(duration=0.0)
    for r in results:
        total = total.add(r.summary)
    return total


def run_eval(
    utts: Sequence[Utterance],
    refs: dict[str, list[str]],
    vocab: Vocab,
    cfg: RunConfig,
    jobs: int = 1,
) -> EvalResult:
    """Evaluate every configured (measure, aggregation) pair on one dataset."""
    results = score_corpus(utts, refs, vocab, cfg, jobs)
    warnings = []
    implicit = sum(r.implicit_heads for r in results)
    if implicit:
        warnings.append(f"{implicit} utterance(s) start with a non-word-begin unit")
    pairs = []
    for k, (measure, agg) in enumerate(cfg.pairs()):
        scores = labeled_scores(results, k)
        report = evaluate(merge_arrays(results, k), cfg.ece_bins, cfg.hist_bins)
        pairs.append(PairResult(measure, agg, report, scores))
    return EvalResult(cfg, pairs, _corpus_summary(results), warnings)


@dataclass
class TransferRow:
    measure: MeasureConfig
    aggregation: AggKind
    tau: Optional[float]
    tnr: Optional[float]
    calibration_fnr: Optional[float]
    warning: Optional[str] = None

    @property
    def label(self) -> str:
        return pair_label(self.measure, self.aggregation)


def run_transfer(
    calibration: tuple[Sequence[Utterance], dict[str, list[str]]],
    evaluation: tuple[Sequence[Utterance], dict[str, list[str]]],
    vocab: Vocab,
    cfg: RunConfig,
    jobs: int = 1,
) -> list[TransferRow]:
    """Choose tau on the calibration set, report TNR on the evaluation set, per pair."""
    cal = score_corpus(*calibration, vocab, cfg, jobs)
    ev = score_corpus(*evaluation, vocab, cfg, jobs)
    rows = []
    for k, (measure, agg) in enumerate(cfg.pairs()):
        try:
            res = tnr_transfer(merge_arrays(cal, k), merge_arrays(ev, k), cfg.fnr_budget)
            rows.append(TransferRow(measure, agg, res.tau, res.tnr, res.calibration_fnr, res.warning))
        except UndefinedMetricError as exc:
            rows.append(TransferRow(measure, agg, None, None, None, str(exc)))
    return rows


SUMMARY_COLUMNS = [
    "config", "measure", "normalization", "alpha", "aggregation",
    "auc_roc", "auc_pr", "auc_nt", "auc_yc", "max_yc", "std_yc", "nce", "ece", "spectrum_flag",
]


def _safe_name(label: str) -> str:
    return label.replace("/", "_")


def report_document(result: EvalResult) -> dict:
    results = []
    for p in result.pairs:
        entry = {
            "config": p.label,
            "measure": p.measure.to_dict(),
            "aggregation": p.aggregation.value,
            "blank_policy": result.config.blank.value,
        }
        entry.update(p.report.to_dict())
        results.append(entry)
    return {
        "config": result.config.to_dict(),
        "alignment": result.alignment.to_dict(),
        "warnings": result.warnings,
        "results": results,
    }


def summary_table(result: EvalResult) -> str:
    lines = ["\t".join(SUMMARY_COLUMNS)]
    for p in result.pairs:
        r = p.report
        alpha = "" if p.measure.alpha is None else f"{p.measure.alpha:.4f}"
        flag = "" if r.spectrum_flag is None else str(r.spectrum_flag).lower()
        cells = [p.label, p.measure.kind.value, p.measure.normalization.value, alpha, p.aggregation.value]
        cells += [fio.fmt_float(getattr(r, c)) for c in SUMMARY_COLUMNS[5:13]]
        cells.append(flag)
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def bundle_files(result: EvalResult) -> dict[str, str]:
    """Relative path -> file content for the whole report bundle."""
    files = {"report.json": fio.dump_json(report_document(result)), "summary.tsv": summary_table(result)}
    for p in result.pairs:
        name = _safe_name(p.label)
        files[f"words/{name}.csv"] = fio.words_csv(p.scores)
        files[f"histograms/{name}.csv"] = fio.histogram_csv(p.report.histogram)
    return files


def transfer_document(rows: Sequence[TransferRow], cfg: RunConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "results": [
            {
                "config": r.label,
                "measure": r.measure.to_dict(),
                "aggregation": r.aggregation.value,
                "tau": r.tau,
                "tnr": r.tnr,
                "calibration_fnr": r.calibration_fnr,
                "warning": r.warning,
            }
            for r in rows
        ],
    }


def transfer_table(rows: Sequence[TransferRow]) -> str:
    lines = ["config\ttau\ttnr\tcalibration_fnr\twarning"]
    for r in rows:
        lines.append(
            "\t".join([r.label, fio.fmt_float(r.tau), fio.fmt_float(r.tnr), fio.fmt_float(r.calibration_fnr), r.warning or ""])
        )
    return "\n".join(lines) + "\n"


def transfer_files(rows: Sequence[TransferRow], cfg: RunConfig) -> dict[str, str]:
    return {"transfer.json": fio.dump_json(transfer_document(rows, cfg)), "transfer.tsv": transfer_table(rows)}


def write_files(files: dict[str, str], out_dir: Path):
    out_dir = Path(out_dir)
    for rel, content in sorted(files.items()):
        path = out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)
