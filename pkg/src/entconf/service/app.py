"""HTTP service exposing confidence scoring and evaluation.

Run with ``entconf serve`` or ``uvicorn entconf.service.app:app``.
"""

from __future__ import annotations


import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..decode import collapse_stream
from ..measures import confidence, renormalize
from ..metrics import UndefinedMetricError
from ..pipeline import bundle_files, report_document, run_eval, run_transfer, transfer_document, transfer_files
from ..synth import generate
from ..words import build_words
from .schemas import (
    ConfidenceRequest,
    ConfidenceResponse,
    Dataset,
    EvalRequest,
    EvalResponse,
    ScoreRequest,
    ScoreResponse,
    SynthRequest,
    SynthResponse,
    TransferRequest,
    TransferResponse,
    UnitModel,
    UtteranceModel,
    VocabModel,
    WordModel,
)


app = FastAPI(title="entconf", version=__version__)


def _dataset(data: Dataset):
    return [u.to_utterance() for u in data.utterances], dict(data.references)


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/confidence", response_model=ConfidenceResponse)
def score_frames(req: ConfidenceRequest):
    try:
        cfg = req.measure.to_config()
        probs = np.asarray(req.probs, dtype=np.float64)
        if req.renormalize:
            probs = renormalize(probs)
        values = np.atleast_1d(confidence(probs, cfg))
    except ValueError as exc:
        raise _bad_request(exc)
    return ConfidenceResponse(measure=cfg.label, confidences=values.tolist())


@app.post("/score", response_model=ScoreResponse)
def score_utterance(req: ScoreRequest):
    try:
        vocab = req.vocab.to_vocab()
        utt = req.utterance.to_utterance()
        cfg = req.measure.to_config()
        units = collapse_stream(utt.steps, vocab, req.mode, cfg, req.aggregation, req.blank)
        words = build_words(units, vocab, req.aggregation)
    except ValueError as exc:
        raise _bad_request(exc)
    return ScoreResponse(
        id=utt.id,
        units=[
            UnitModel(
                token_id=u.token_id,
                text=vocab.text(u.token_id),
                frame_span=u.frame_span,
                frame_confidences=u.frame_confidences,
                unit_confidence=u.unit_confidence,
            )
            for u in units
        ],
        words=[WordModel(word=w.surface, unit_ids=w.unit_ids, confidence=w.confidence) for w in words],
    )


@app.post("/eval", response_model=EvalResponse)
def evaluate(req: EvalRequest):
    try:
        cfg = req.config.to_config()
        utts, refs = _dataset(req)
        result = run_eval(utts, refs, req.vocab.to_vocab(), cfg, jobs=req.jobs)
    except (ValueError, UndefinedMetricError) as exc:
        raise _bad_request(exc)
    return EvalResponse(
        report=report_document(result),
        files=bundle_files(result),
        exit_code=3 if result.all_undefined() else 0,
    )


@app.post("/transfer", response_model=TransferResponse)
def transfer(req: TransferRequest):
    try:
        cfg = req.config.to_config()
        rows = run_transfer(_dataset(req.calibration), _dataset(req.evaluation), req.vocab.to_vocab(), cfg, req.jobs)
    except ValueError as exc:
        raise _bad_request(exc)
    return TransferResponse(report=transfer_document(rows, cfg), files=transfer_files(rows, cfg))


@app.post("/synth", response_model=SynthResponse)
def synth(req: SynthRequest):
    try:
        cfg = req.to_config()
    except (TypeError, ValueError) as exc:
        raise _bad_request(exc)
    utts, refs, vocab = generate(cfg)
    return SynthResponse(
        utterances=[UtteranceModel.from_utterance(u) for u in utts],
        references=refs,
        vocab=VocabModel.from_vocab(vocab),
        config=cfg.to_dict(),
    )
