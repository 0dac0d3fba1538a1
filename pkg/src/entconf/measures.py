"""Per-frame confidence measures.

Every measure maps a probability vector over the full vocabulary (blank
included) to a value in [0, 1], where a uniform distribution scores 0 and a
one-hot distribution scores 1.

All functions accept either a single distribution (1-D array) or a batch of
distributions stacked along the first axis (2-D array, one row per frame),
and return a float or a 1-D array accordingly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy.special import xlogy

SIMPLEX_TOL = 1e-6

ArrayLike = Union[np.ndarray, list, tuple]


class DistributionError(ValueError):
    """Raised when an input is not a valid probability distribution."""


class MeasureKind(str, enum.Enum):
    MAX_PROB = "max_prob"
    GIBBS = "gibbs"
    TSALLIS = "tsallis"
    RENYI = "renyi"


class Normalization(str, enum.Enum):
    LINEAR = "lin"
    EXPONENTIAL = "exp"


@dataclass(frozen=True)
class MeasureConfig:
    """One confidence measure: entropy kind, normalization and alpha.

    ``alpha`` is only meaningful for Tsallis and Renyi and is dropped for the
    other kinds so that equal measures compare and hash equal.
    """

    kind: MeasureKind
    normalization: Normalization = Normalization.LINEAR
    alpha: Optional[float] = None

    def __post_init__(self):
        kind = MeasureKind(self.kind)
        norm = Normalization(self.normalization)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "normalization", norm)
        if kind is MeasureKind.MAX_PROB and norm is not Normalization.LINEAR:
            raise ValueError("max_prob is already normalized; only 'lin' normalization is allowed")
        if kind in (MeasureKind.TSALLIS, MeasureKind.RENYI):
            if self.alpha is None:
                raise ValueError(f"{kind.value} requires alpha")
            object.__setattr__(self, "alpha", _check_alpha(self.alpha))
        else:
            object.__setattr__(self, "alpha", None)

    @property
    def label(self) -> str:
        """Stable, filename-safe identifier, e.g. ``tsallis-exp-a0.3333``."""
        if self.kind is MeasureKind.MAX_PROB:
            return "max_prob"
        base = f"{self.kind.value}-{self.normalization.value}"
        if self.alpha is None:
            return base
        return f"{base}-a{self.alpha:.4f}"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "normalization": self.normalization.value, "alpha": self.alpha}


def parse_alpha(text: Union[str, float]) -> float:
    """Parse an alpha given as a float or a fraction such as ``"1/3"``."""
    if isinstance(text, (int, float)):
        return float(text)
    return float(Fraction(text.strip()))


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0:
        raise ValueError(f"alpha must be a positive finite number, got {alpha}")
    if alpha == 1.0:
        raise ValueError("alpha = 1 is the Gibbs limit; use the gibbs measure instead")
    return alpha


def validate(probs: ArrayLike) -> np.ndarray:
    """Check the simplex invariants and return a float64 array.

    Rows must have at least two entries, no negative or non-finite entries,
    and sum to one within ``SIMPLEX_TOL``. Inputs are never renormalized here.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim not in (1, 2):
        raise DistributionError(f"expected a 1-D or 2-D array, got shape {p.shape}")
    if p.shape[-1] < 2:
        raise DistributionError(f"vocabulary size must be >= 2, got {p.shape[-1]}")
    if not np.all(np.isfinite(p)):
        raise DistributionError("distribution contains non-finite entries")
    if np.any(p < 0):
        raise DistributionError("distribution contains negative entries")
    sums = p.sum(axis=-1)
    bad = np.abs(sums - 1.0) > SIMPLEX_TOL
    if np.any(bad):
        worst = float(np.atleast_1d(sums)[np.argmax(np.atleast_1d(np.abs(sums - 1.0)))])
        raise DistributionError(f"distribution does not sum to 1 within {SIMPLEX_TOL} (sum={worst!r})")
    return p


def renormalize(probs: ArrayLike) -> np.ndarray:
    """Clip negatives to zero and rescale rows to sum to one."""
    p = np.clip(np.asarray(probs, dtype=np.float64), 0.0, None)
    return p / p.sum(axis=-1, keepdims=True)


def _prepare(probs: ArrayLike, check: bool) -> np.ndarray:
    p = validate(probs) if check else np.asarray(probs, dtype=np.float64)
    # Sorting makes every reduction below independent of token order, bit for bit.
    return np.sort(p, axis=-1)


def _finish(values: np.ndarray, ndim: int):
    values = np.clip(values, 0.0, 1.0)
    if ndim == 1:
        return float(values)
    return values


def _power_sum(p: np.ndarray, alpha: float) -> np.ndarray:
    return np.sum(p**alpha, axis=-1)


def confidence_max_prob(probs: ArrayLike, *, check: bool = True):
    p = _prepare(probs, check)
    v = p.shape[-1]
    return _finish((p[..., -1] - 1.0 / v) / (1.0 - 1.0 / v), p.ndim)


def confidence_gibbs_lin(probs: ArrayLike, *, check: bool = True):
    p = _prepare(probs, check)
    v = p.shape[-1]
    neg_entropy = np.sum(xlogy(p, p), axis=-1)
    return _finish(1.0 + neg_entropy / math.log(v), p.ndim)


def confidence_gibbs_exp(probs: ArrayLike, *, check: bool = True):
    p = _prepare(probs, check)
    v = p.shape[-1]
    neg_entropy = np.sum(xlogy(p, p), axis=-1)
    return _finish((v * np.exp(neg_entropy) - 1.0) / (v - 1.0), p.ndim)


def confidence_tsallis_lin(probs: ArrayLike, alpha: float, *, check: bool = True):
    alpha = _check_alpha(alpha)
    p = _prepare(probs, check)
    v = p.shape[-1]
    top = v ** (1.0 - alpha)
    return _finish((top - _power_sum(p, alpha)) / (top - 1.0), p.ndim)


def confidence_tsallis_exp(probs: ArrayLike, alpha: float, *, check: bool = True):
    """Exponentially normalized Tsallis confidence.

    With ``a = (V^(1-alpha) - sum p^alpha) / (1 - alpha)`` and
    ``b = (V^(1-alpha) - 1) / (1 - alpha)`` (both >= 0, a <= b) the value is
    ``expm1(a) / expm1(b)``, evaluated as ``e^(a-b) (1-e^-a) / (1-e^-b)`` so
    that large vocabularies with small alpha never overflow.
    """
    alpha = _check_alpha(alpha)
    p = _prepare(probs, check)
    v = p.shape[-1]
    top = v ** (1.0 - alpha)
    a = (top - _power_sum(p, alpha)) / (1.0 - alpha)
    b = (top - 1.0) / (1.0 - alpha)
    a = np.maximum(a, 0.0)
    values = np.exp(a - b) * (-np.expm1(-a)) / (-math.expm1(-b))
    return _finish(values, p.ndim)


def confidence_renyi_lin(probs: ArrayLike, alpha: float, *, check: bool = True):
    alpha = _check_alpha(alpha)
    p = _prepare(probs, check)
    v = p.shape[-1]
    log_s = np.log(_power_sum(p, alpha))
    return _finish(1.0 + log_s / ((alpha - 1.0) * math.log(v)), p.ndim)


def confidence_renyi_exp(probs: ArrayLike, alpha: float, *, check: bool = True):
    alpha = _check_alpha(alpha)
    p = _prepare(probs, check)
    v = p.shape[-1]
    log_s = np.log(_power_sum(p, alpha))
    return _finish((v * np.exp(log_s / (alpha - 1.0)) - 1.0) / (v - 1.0), p.ndim)


def confidence(probs: ArrayLike, cfg: MeasureConfig, *, check: bool = True):
    """Dispatch to the measure selected by ``cfg``."""
    kind, norm = cfg.kind, cfg.normalization
    if kind is MeasureKind.MAX_PROB:
        if norm is not Normalization.LINEAR:
            raise ValueError(f"unsupported combination: {kind.value}/{norm.value}")
        return confidence_max_prob(probs, check=check)
    if kind is MeasureKind.GIBBS:
        fn = confidence_gibbs_lin if norm is Normalization.LINEAR else confidence_gibbs_exp
        return fn(probs, check=check)
    if kind is MeasureKind.TSALLIS:
        fn = confidence_tsallis_lin if norm is Normalization.LINEAR else confidence_tsallis_exp
        return fn(probs, cfg.alpha, check=check)
    if kind is MeasureKind.RENYI:
        fn = confidence_renyi_lin if norm is Normalization.LINEAR else confidence_renyi_exp
        return fn(probs, cfg.alpha, check=check)
    raise ValueError(f"unsupported combination: {kind}/{norm}")


def all_variants(alpha: float = 1.0 / 3.0) -> list[MeasureConfig]:
    """Every measure and normalization combination (seven of them) at a single alpha."""
    out = [MeasureConfig(MeasureKind.MAX_PROB)]
    for kind in (MeasureKind.GIBBS, MeasureKind.TSALLIS, MeasureKind.RENYI):
        for norm in (Normalization.LINEAR, Normalization.EXPONENTIAL):
            a = None if kind is MeasureKind.GIBBS else alpha
            out.append(MeasureConfig(kind, norm, a))
    return out


RECOMMENDED = MeasureConfig(MeasureKind.TSALLIS, Normalization.EXPONENTIAL, 1.0 / 3.0)
DEFAULT_ALPHAS = (0.25, 1.0 / 3.0, 0.5)
