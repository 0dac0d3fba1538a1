"""Confidence evaluation metrics over labeled word scores.

Correct words are the positive class throughout. A word is predicted
incorrect at threshold ``tau`` when its confidence is strictly below ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .align import LabeledScore

NCE_EPS = 1e-15


class UndefinedMetricError(ValueError):
    """The metric is undefined for the given class composition."""


def as_arrays(scores: Sequence[LabeledScore]) -> tuple[np.ndarray, np.ndarray]:
    """``(confidences, is_correct)`` arrays for a list of labeled scores."""
    conf = np.fromiter((s.confidence for s in scores), dtype=np.float64, count=len(scores))
    correct = np.fromiter((s.correct for s in scores), dtype=bool, count=len(scores))
    return conf, correct


def _split(scores) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(scores, tuple):
        conf, correct = scores
        return np.asarray(conf, dtype=np.float64), np.asarray(correct, dtype=bool)
    return as_arrays(scores)


def _need_both(correct: np.ndarray, name: str):
    if correct.all() or not correct.any():
        raise UndefinedMetricError(f"{name} needs both correct and incorrect words")


def auc_roc(scores) -> float:
    """Probability that a random correct word outranks a random incorrect one.

    Ties count one half. Computed from average ranks; the doubled
    Mann-Whitney statistic is an integer, so the result is exact.
    """
    conf, correct = _split(scores)
    _need_both(correct, "AUC_ROC")
    n_pos = int(correct.sum())
    n_neg = correct.size - n_pos
    ranks2 = np.rint(2 * rankdata(conf, method="average")).astype(np.int64)
    u2 = int(ranks2[correct].sum()) - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


def _average_precision(conf: np.ndarray, positive: np.ndarray) -> float:
    n_pos = int(positive.sum())
    order = np.argsort(-conf, kind="stable")
    conf, positive = conf[order], positive[order]
    tp = np.cumsum(positive)
    fp = np.cumsum(~positive)
    # Keep only the last index of each run of tied scores.
    last = np.r_[np.flatnonzero(np.diff(conf)), conf.size - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall_step = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(recall_step * precision))


def auc_pr(scores) -> float:
    """Average precision with correct words as positives."""
    conf, correct = _split(scores)
    if not correct.any():
        raise UndefinedMetricError("AUC_PR needs at least one correct word")
    return _average_precision(conf, correct)


def auc_nt(scores) -> float:
    """NPV vs TNR area: average precision with errors as positives and scores flipped."""
    conf, correct = _split(scores)
    if correct.all():
        raise UndefinedMetricError("AUC_NT needs at least one incorrect word")
    return _average_precision(1.0 - conf, ~correct)


def nce(scores, eps: float = NCE_EPS) -> tuple[float, int]:
    """Normalized cross entropy and the number of scores clamped to ``[eps, 1-eps]``.

    Zero for the constant estimator that always outputs the fraction of
    correct words, one for a perfect estimator, unbounded below.
    """
    conf, correct = _split(scores)
    _need_both(correct, "NCE")
    n = correct.size
    n_c = int(correct.sum())
    p_c = n_c / n
    h_max = -n_c * math.log2(p_c) - (n - n_c) * math.log2(1.0 - p_c)
    clipped = np.clip(conf, eps, 1.0 - eps)
    n_clamped = int(np.count_nonzero(clipped != conf))
    ll = np.sum(np.log2(clipped[correct])) + np.sum(np.log2(1.0 - clipped[~correct]))
    return float((h_max + ll) / h_max), n_clamped


def bin_index(conf: np.ndarray, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width bins over [0, 1]; bins are [lo, hi) except the last, [lo, 1]."""
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.searchsorted(edges, conf, side="right") - 1
    return np.clip(idx, 0, n_bins - 1), edges


def ece(scores, n_bins: int = 10) -> float:
    conf, correct = _split(scores)
    if conf.size == 0:
        raise UndefinedMetricError("ECE needs at least one word")
    idx, _ = bin_index(conf, n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    acc = np.bincount(idx, weights=correct.astype(np.float64), minlength=n_bins)
    mean_conf = np.bincount(idx, weights=conf, minlength=n_bins)
    occupied = counts > 0
    gap = np.abs(acc[occupied] - mean_conf[occupied]) / counts[occupied]
    return float(np.sum(counts[occupied] / conf.size * gap))


def _youden_steps(conf: np.ndarray, correct: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interval lengths and J values of the piecewise-constant Youden curve on [0, 1].

    For tau in (u_k, u_{k+1}] the words below tau are exactly those with
    score <= u_k, where u_0 = 0 < u_1 < ... are the distinct scores in (0, 1)
    followed by 1.
    """
    n_pos = int(correct.sum())
    n_neg = correct.size - n_pos
    inner = np.unique(conf[(conf > 0.0) & (conf < 1.0)])
    knots = np.r_[0.0, inner, 1.0]
    lengths = np.diff(knots)
    lower = knots[:-1]
    fn = np.searchsorted(np.sort(conf[correct]), lower, side="right")
    tn = np.searchsorted(np.sort(conf[~correct]), lower, side="right")
    j = tn / n_neg - fn / n_pos
    return lengths, j


def youden_stats(scores) -> tuple[float, float, float]:
    """``(AUC_YC, MAX_YC, STD_YC)`` of J(tau) = TNR(tau) - FNR(tau), tau in [0, 1].

    Integrals are exact sums over the constant pieces of J under the uniform
    measure on tau. The maximum includes J(0) = 0.
    """
    conf, correct = _split(scores)
    _need_both(correct, "Youden statistics")
    lengths, j = _youden_steps(conf, correct)
    area = float(np.sum(lengths * j))
    second = float(np.sum(lengths * j * j))
    std = math.sqrt(max(second - area * area, 0.0))
    peak = max(0.0, float(np.max(j[lengths > 0]))) if np.any(lengths > 0) else 0.0
    return area, peak, std


@dataclass
class TransferResult:
    tau: float
    tnr: float
    calibration_fnr: float
    warning: Optional[str] = None


def fnr_at(conf: np.ndarray, correct: np.ndarray, tau: float) -> float:
    pos = conf[correct]
    return float(np.count_nonzero(pos < tau)) / pos.size


def tnr_at(conf: np.ndarray, correct: np.ndarray, tau: float) -> float:
    neg = conf[~correct]
    return float(np.count_nonzero(neg < tau)) / neg.size


def select_threshold(scores, fnr_budget: float) -> float:
    """Largest tau in [0, 1] whose false-negative rate stays within budget."""
    conf, correct = _split(scores)
    if not 0.0 < fnr_budget < 1.0:
        raise ValueError("fnr_budget must be in (0, 1)")
    pos = np.sort(conf[correct])
    n = pos.size
    if n == 0:
        raise UndefinedMetricError("threshold selection needs correct words")
    # m = largest count of rejected correct words allowed by the budget.
    m = int(math.floor(fnr_budget * n))
    while (m + 1) / n <= fnr_budget:
        m += 1
    while m > 0 and m / n > fnr_budget:
        m -= 1
    if m >= n:
        return 1.0
    return float(min(pos[m], 1.0))


def tnr_transfer(calibration, evaluation, fnr_budget: float = 0.05) -> TransferResult:
    """Pick tau on ``calibration`` under an FNR budget, report TNR on ``evaluation``."""
    c_conf, c_correct = _split(calibration)
    e_conf, e_correct = _split(evaluation)
    if e_correct.all():
        raise UndefinedMetricError("evaluation set has no incorrect words")
    tau = select_threshold((c_conf, c_correct), fnr_budget)
    warning = None
    if tau <= 0.0:
        warning = "no positive threshold satisfies the FNR budget; tau = 0 rejects nothing"
    return TransferResult(
        tau=tau,
        tnr=tnr_at(e_conf, e_correct, tau),
        calibration_fnr=fnr_at(c_conf, c_correct, tau),
        warning=warning,
    )


@dataclass
class HistogramData:
    edges: list[float]
    correct: list[int]
    incorrect: list[int]


def histogram(scores, n_bins: int = 20) -> HistogramData:
    conf, correct = _split(scores)
    idx, edges = bin_index(conf, n_bins)
    return HistogramData(
        edges=edges.tolist(),
        correct=np.bincount(idx[correct], minlength=n_bins).tolist(),
        incorrect=np.bincount(idx[~correct], minlength=n_bins).tolist(),
    )


@dataclass
class CurveReport:
    """All metrics for one configuration. ``None`` marks an undefined metric."""

    n_correct: int
    n_incorrect: int
    auc_roc: Optional[float] = None
    auc_pr: Optional[float] = None
    auc_nt: Optional[float] = None
    nce: Optional[float] = None
    nce_clamped: int = 0
    ece: Optional[float] = None
    auc_yc: Optional[float] = None
    max_yc: Optional[float] = None
    std_yc: Optional[float] = None
    spectrum_flag: Optional[bool] = None
    histogram: Optional[HistogramData] = None
    warnings: list[str] = field(default_factory=list)

    def defined(self) -> bool:
        """True when the two-class metrics exist.

        On single-class data AUC_PR or AUC_NT can still be computed, but they
        are trivially 1.0 and carry no information.
        """
        return self.auc_roc is not None

    def to_dict(self) -> dict:
        return asdict(self)


def _try(report: CurveReport, name: str, fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError as exc:
        report.warnings.append(f"{name}: {exc}")
        return None


def evaluate(scores, ece_bins: int = 10, hist_bins: int = 20) -> CurveReport:
    """Compute every metric; undefined ones are left as ``None`` with a warning."""
    conf, correct = _split(scores)
    data = (conf, correct)
    n_c = int(correct.sum())
    report = CurveReport(n_correct=n_c, n_incorrect=int(correct.size - n_c))
    report.auc_roc = _try(report, "auc_roc", auc_roc, data)
    report.auc_pr = _try(report, "auc_pr", auc_pr, data)
    report.auc_nt = _try(report, "auc_nt", auc_nt, data)
    nce_out = _try(report, "nce", nce, data)
    if nce_out is not None:
        report.nce, report.nce_clamped = nce_out
    if conf.size:
        report.ece = ece(data, ece_bins)
    yc = _try(report, "youden", youden_stats, data)
    if yc is not None:
        report.auc_yc, report.max_yc, report.std_yc = yc
        report.spectrum_flag = report.auc_yc < report.std_yc
    report.histogram = histogram(data, hist_bins)
    return report
