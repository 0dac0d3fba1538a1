"""File formats: vocab sidecar, posterior streams, references, report bundles."""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from .decode import Utterance, Vocab

MAGIC = b"CNF1"
PathLike = Union[str, Path]


class SchemaError(ValueError):
    """Malformed input file; the message carries the file and line."""


def load_vocab(path: PathLike) -> Vocab:
    try:
        with open(path, encoding="utf-8") as fh:
            return Vocab.from_dict(json.load(fh))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: invalid vocabulary: {exc}") from exc


def save_vocab(vocab: Vocab, path: PathLike):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vocab.to_dict(), fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def parse_utterance(record: dict) -> Utterance:
    utt_id = record["id"]
    if not isinstance(utt_id, str):
        raise TypeError("'id' must be a string")
    steps = np.asarray(record["steps"], dtype=np.float64)
    if steps.size == 0:
        steps = np.zeros((0, 0))
    elif steps.ndim != 2:
        raise ValueError("'steps' must be a list of equal-length probability rows")
    duration = record.get("duration")
    return Utterance(utt_id, steps, None if duration is None else float(duration))


def read_ndjson(path: PathLike) -> Iterator[Utterance]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield parse_utterance(json.loads(line))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc


def utterance_record(utt: Utterance) -> dict:
    record = {"id": utt.id, "steps": utt.steps.tolist()}
    if utt.duration is not None:
        record["duration"] = utt.duration
    return record


def write_ndjson(utts: Iterable[Utterance], path: PathLike):
    with open(path, "w", encoding="utf-8") as fh:
        for utt in utts:
            fh.write(json.dumps(utterance_record(utt), separators=(",", ":")))
            fh.write("\n")


# Binary container, little-endian:
#   b"CNF1" | u32 vocab_size | u32 n_utterances
#   per utterance: u32 id_len | id (utf-8) | f64 duration (NaN if unknown)
#                  | u32 n_steps | n_steps * vocab_size f32
def write_binary(utts: Iterable[Utterance], path: PathLike, vocab_size: int):
    utts = list(utts)
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", vocab_size, len(utts)))
        for utt in utts:
            raw_id = utt.id.encode("utf-8")
            n_steps = utt.steps.shape[0] if utt.steps.size else 0
            if n_steps and utt.steps.shape[1] != vocab_size:
                raise ValueError(f"{utt.id}: step width {utt.steps.shape[1]} != {vocab_size}")
            duration = math.nan if utt.duration is None else utt.duration
            fh.write(struct.pack("<I", len(raw_id)) + raw_id + struct.pack("<dI", duration, n_steps))
            if n_steps:
                fh.write(np.ascontiguousarray(utt.steps, dtype="<f4").tobytes())


def read_binary(path: PathLike) -> Iterator[Utterance]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise SchemaError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    try:
        vocab_size, count = struct.unpack_from("<II", data, 4)
        off = 12
        for k in range(count):
            (id_len,) = struct.unpack_from("<I", data, off)
            off += 4
            utt_id = data[off : off + id_len].decode("utf-8")
            off += id_len
            duration, n_steps = struct.unpack_from("<dI", data, off)
            off += 12
            n_bytes = 4 * n_steps * vocab_size
            if off + n_bytes > len(data):
                raise SchemaError(f"{path}: utterance {k} ({utt_id}) truncated")
            rows = np.frombuffer(data, dtype="<f4", count=n_steps * vocab_size, offset=off)
            off += n_bytes
            steps = rows.astype(np.float64).reshape(n_steps, vocab_size)
            yield Utterance(utt_id, steps, None if math.isnan(duration) else duration)
    except struct.error as exc:
        raise SchemaError(f"{path}: truncated container: {exc}") from exc


def read_posteriors(path: PathLike, fmt: Optional[str] = None) -> list[Utterance]:
    if fmt is None:
        with open(path, "rb") as fh:
            fmt = "binary" if fh.read(4) == MAGIC else "ndjson"
    reader = read_binary if fmt == "binary" else read_ndjson
    return list(reader(path))


def read_references(path: PathLike) -> dict[str, list[str]]:
    """``utterance_id<TAB>words`` per line; an empty text means an empty reference."""
    refs: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            utt_id, sep, text = line.partition("\t")
            if not sep:
                raise SchemaError(f"{path}:{lineno}: expected 'utterance_id<TAB>words'")
            if utt_id in refs:
                raise SchemaError(f"{path}:{lineno}: duplicate utterance id {utt_id!r}")
            refs[utt_id] = text.split()
    return refs


def write_references(refs: dict[str, list[str]], path: PathLike):
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id, words in refs.items():
            fh.write(f"{utt_id}\t{' '.join(words)}\n")


def fmt_float(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.10f}"


def words_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["utterance_id", "word", "confidence", "label", "error_kind"])
    for r in rows:
        writer.writerow([r.utterance_id, r.word, fmt_float(r.confidence), r.label.value, r.error_kind.value])
    return buf.getvalue()


def histogram_csv(hist) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_lo", "bin_hi", "count_correct", "count_incorrect"])
    for k in range(len(hist.correct)):
        writer.writerow([fmt_float(hist.edges[k]), fmt_float(hist.edges[k + 1]), hist.correct[k], hist.incorrect[k]])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"
