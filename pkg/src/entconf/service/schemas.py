"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

from ..decode import AggKind, BlankPolicy, DecodeMode, Utterance, Vocab
from ..measures import MeasureConfig, MeasureKind, Normalization, parse_alpha
from ..pipeline import RunConfig
from ..synth import SynthConfig, overconfident_preset


class MeasureSpec(BaseModel):
    kind: MeasureKind
    normalization: Normalization = Normalization.LINEAR
    alpha: Optional[Union[float, str]] = None

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v):
        return None if v is None else parse_alpha(v)

    def to_config(self) -> MeasureConfig:
        return MeasureConfig(self.kind, self.normalization, self.alpha)

    @classmethod
    def from_config(cls, cfg: MeasureConfig) -> "MeasureSpec":
        return cls(kind=cfg.kind, normalization=cfg.normalization, alpha=cfg.alpha)


class TokenModel(BaseModel):
    id: int
    text: str
    word_begin: bool = False


class VocabModel(BaseModel):
    size: int
    blank_id: int
    tokens: list[TokenModel]

    def to_vocab(self) -> Vocab:
        return Vocab.from_dict(self.model_dump())

    @classmethod
    def from_vocab(cls, vocab: Vocab) -> "VocabModel":
        return cls(**vocab.to_dict())


class UtteranceModel(BaseModel):
    id: str
    steps: list[list[float]]
    duration: Optional[float] = None

    def to_utterance(self) -> Utterance:
        steps = np.asarray(self.steps, dtype=np.float64) if self.steps else np.zeros((0, 0))
        return Utterance(self.id, steps, self.duration)

    @classmethod
    def from_utterance(cls, utt: Utterance) -> "UtteranceModel":
        return cls(id=utt.id, steps=utt.steps.tolist(), duration=utt.duration)


class Dataset(BaseModel):
    utterances: list[UtteranceModel]
    references: dict[str, list[str]]


class RunConfigModel(BaseModel):
    mode: DecodeMode = DecodeMode.CTC
    measures: Optional[list[MeasureSpec]] = None
    aggregations: list[AggKind] = Field(default_factory=lambda: list(AggKind))
    blank: BlankPolicy = BlankPolicy.EXCLUDE
    ece_bins: int = Field(10, ge=1)
    hist_bins: int = Field(20, ge=1)
    fnr_budget: float = Field(0.05, gt=0.0, lt=1.0)
    normalize_text: bool = True
    renormalize: bool = False
    include_recommended: bool = True

    def to_config(self) -> RunConfig:
        kwargs = self.model_dump(exclude={"measures"})
        if self.measures is not None:
            kwargs["measures"] = [m.to_config() for m in self.measures]
        return RunConfig(**kwargs)

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "RunConfigModel":
        data = cfg.to_dict()
        data["measures"] = [MeasureSpec.from_config(m) for m in cfg.measures]
        return cls(**data)


class ConfidenceRequest(BaseModel):
    probs: list[list[float]]
    measure: MeasureSpec
    renormalize: bool = False


class ConfidenceResponse(BaseModel):
    measure: str
    confidences: list[float]


class ScoreRequest(BaseModel):
    utterance: UtteranceModel
    vocab: VocabModel
    mode: DecodeMode = DecodeMode.CTC
    measure: MeasureSpec
    aggregation: AggKind = AggKind.MIN
    blank: BlankPolicy = BlankPolicy.EXCLUDE


class UnitModel(BaseModel):
    token_id: int
    text: str
    frame_span: tuple[int, int]
    frame_confidences: list[float]
    unit_confidence: float


class WordModel(BaseModel):
    word: str
    unit_ids: list[int]
    confidence: float


class ScoreResponse(BaseModel):
    id: str
    units: list[UnitModel]
    words: list[WordModel]


class EvalRequest(Dataset):
    vocab: VocabModel
    config: RunConfigModel = Field(default_factory=RunConfigModel)
    jobs: int = Field(1, ge=1)


class EvalResponse(BaseModel):
    report: dict
    files: dict[str, str]
    exit_code: int


class TransferRequest(BaseModel):
    calibration: Dataset
    evaluation: Dataset
    vocab: VocabModel
    config: RunConfigModel = Field(default_factory=RunConfigModel)
    jobs: int = Field(1, ge=1)


class TransferResponse(BaseModel):
    report: dict
    files: dict[str, str]


class SynthRequest(BaseModel):
    preset: Optional[str] = None
    overrides: dict = Field(default_factory=dict)

    def to_config(self) -> SynthConfig:
        if self.preset in (None, "default"):
            return SynthConfig(**self.overrides)
        if self.preset == "overconfident":
            return overconfident_preset(**self.overrides)
        raise ValueError(f"unknown preset {self.preset!r}")


class SynthResponse(Dataset):
    vocab: VocabModel
    config: dict


class ErrorResponse(BaseModel):
    detail: str
