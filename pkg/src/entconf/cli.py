"""Command line interface.

``eval`` and ``transfer`` run in-process by default; with ``--server URL``
they send the loaded inputs to a running ``entconf serve`` instance and
write the bundle it returns.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import io as fio
from .checks import run_all
from .decode import AggKind, BlankPolicy, DecodeMode
from .measures import DEFAULT_ALPHAS, MeasureConfig, MeasureKind, Normalization, parse_alpha
from .metrics import UndefinedMetricError
from .pipeline import (
    RunConfig,
    bundle_files,
    run_eval,
    run_transfer,
    transfer_files,
    write_files,
)
from .synth import SynthConfig, generate, overconfident_preset

log = logging.getLogger("entconf")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_SCHEMA = 2
EXIT_UNDEFINED = 3


def build_measures(kinds: Sequence[str], norms: Sequence[str], alphas: Sequence[float]) -> list[MeasureConfig]:
    """Cartesian sweep of kinds x normalizations x alphas, skipping invalid combinations."""
    out = []
    for kind, norm in itertools.product(kinds, norms):
        kind, norm = MeasureKind(kind), Normalization(norm)
        if kind is MeasureKind.MAX_PROB:
            if norm is Normalization.LINEAR:
                out.append(MeasureConfig(kind))
            continue
        if kind is MeasureKind.GIBBS:
            out.append(MeasureConfig(kind, norm))
            continue
        out.extend(MeasureConfig(kind, norm, a) for a in alphas)
    if not out:
        raise ValueError("the measure sweep is empty")
    return list(dict.fromkeys(out))


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--vocab", help="vocabulary sidecar JSON")
    p.add_argument("--format", choices=["ndjson", "binary"], default=None,
                   help="posterior file format (default: detect from magic bytes)")
    p.add_argument("--mode", choices=[m.value for m in DecodeMode], default="ctc")
    p.add_argument("--measure", action="append", choices=[k.value for k in MeasureKind],
                   help="measure kind; repeat to sweep (default: all)")
    p.add_argument("--norm", action="append", choices=[n.value for n in Normalization],
                   help="normalization; repeat to sweep (default: lin and exp)")
    p.add_argument("--alpha", action="append", type=parse_alpha,
                   help="alpha for Tsallis/Renyi, e.g. 1/3; repeat to sweep (default: 1/4 1/3 1/2)")
    p.add_argument("--agg", action="append", choices=[a.value for a in AggKind],
                   help="unit and word aggregation; repeat to sweep (default: all)")
    p.add_argument("--blank", choices=[b.value for b in BlankPolicy], default="exclude")
    p.add_argument("--ece-bins", type=int, default=10)
    p.add_argument("--hist-bins", type=int, default=20)
    p.add_argument("--fnr-budget", type=float, default=0.05)
    p.add_argument("--renormalize", action="store_true",
                   help="rescale rows that do not sum to one instead of rejecting them")
    p.add_argument("--no-text-normalization", dest="normalize_text", action="store_false")
    p.add_argument("--no-recommended", dest="include_recommended", action="store_false",
                   help="do not add tsallis-exp alpha=1/3 with min aggregation to the sweep")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for per-utterance work")
    p.add_argument("--out-dir")
    p.add_argument("--server", default=None, help="URL of a running entconf service")
    p.add_argument("--config", default=None, help="flat JSON object of flag defaults")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entconf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.set_defaults(_commands=sub.choices)

    p = sub.add_parser("eval", help="score and evaluate one dataset")
    p.add_argument("--posteriors")
    p.add_argument("--refs")
    _add_run_flags(p)

    p = sub.add_parser("transfer", help="pick tau on a calibration set, report TNR on another")
    p.add_argument("--cal-posteriors")
    p.add_argument("--cal-refs")
    p.add_argument("--eval-posteriors")
    p.add_argument("--eval-refs")
    _add_run_flags(p)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out-dir")
    p.add_argument("--preset", choices=["default", "overconfident"], default="default")
    p.add_argument("--format", choices=["ndjson", "binary"], default="ndjson")
    p.add_argument("--mode", choices=[m.value for m in DecodeMode], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-utterances", type=int, default=None)
    p.add_argument("--words-per-utterance", type=int, default=None)
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--error-rate", type=float, default=None)
    p.add_argument("--sharpness", type=float, default=None)
    p.add_argument("--pure-noise", action="store_true", default=None,
                   help="empty references; every emitted word is an insertion")
    p.add_argument("--config", default=None, help="flat JSON object of flag defaults")

    p = sub.add_parser("oracle-check", help="compare fast metrics with brute-force oracles")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


REQUIRED = {
    "eval": ["posteriors", "refs", "vocab", "out_dir"],
    "transfer": ["cal_posteriors", "cal_refs", "eval_posteriors", "eval_refs", "vocab", "out_dir"],
    "synth": ["out_dir"],
}
SWEEP_KEYS = ("measure", "norm", "alpha", "agg")


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse twice so that a ``--config`` file supplies defaults the command line can override."""
    parser = make_parser()
    args = cli_args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if path:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
        if not isinstance(values, dict):
            parser.error(f"{path}: expected a flat JSON object")
        sub = args._commands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(k.replace("-", "_") for k in values) - known)
        if unknown:
            parser.error(f"{path}: unknown keys {', '.join(unknown)}")
        defaults = {}
        for key, value in values.items():
            key = key.replace("-", "_")
            if key == "alpha":
                value = [parse_alpha(v) for v in (value if isinstance(value, list) else [value])]
            elif key in ("measure", "norm", "agg") and not isinstance(value, list):
                value = [value]
            defaults[key] = value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
        # Repeated flags would otherwise append to the config's list.
        for key in SWEEP_KEYS:
            if getattr(cli_args, key, None) is not None:
                setattr(args, key, getattr(cli_args, key))
    missing = [k for k in REQUIRED.get(args.command, []) if getattr(args, k, None) is None]
    if missing:
        parser.error(f"{args.command}: missing required option(s) " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return args


def run_config(args) -> RunConfig:
    measures = build_measures(
        args.measure or [k.value for k in MeasureKind],
        args.norm or [n.value for n in Normalization],
        args.alpha or list(DEFAULT_ALPHAS),
    )
    return RunConfig(
        mode=args.mode,
        measures=measures,
        aggregations=args.agg or [a.value for a in AggKind],
        blank=args.blank,
        ece_bins=args.ece_bins,
        hist_bins=args.hist_bins,
        fnr_budget=args.fnr_budget,
        normalize_text=args.normalize_text,
        renormalize=args.renormalize,
        include_recommended=args.include_recommended,
    )


def _load(posteriors, refs, fmt):
    return fio.read_posteriors(posteriors, fmt), fio.read_references(refs)


def _remote(url: str, endpoint: str, payload) -> dict:
    import httpx

    resp = httpx.post(url.rstrip("/") + endpoint, content=payload.model_dump_json(), timeout=None,
                      headers={"content-type": "application/json"})
    if resp.status_code == 422:
        raise ValueError(f"server rejected the request: {resp.json().get('detail')}")
    resp.raise_for_status()
    return resp.json()


def cmd_eval(args) -> int:
    cfg = run_config(args)
    vocab = fio.load_vocab(args.vocab)
    utts, refs = _load(args.posteriors, args.refs, args.format)
    if args.server:
        from .service.schemas import EvalRequest, RunConfigModel, UtteranceModel, VocabModel

        req = EvalRequest(
            utterances=[UtteranceModel.from_utterance(u) for u in utts],
            references=refs,
            vocab=VocabModel.from_vocab(vocab),
            config=RunConfigModel.from_config(cfg),
            jobs=args.jobs,
        )
        body = _remote(args.server, "/eval", req)
        files, code = body["files"], body["exit_code"]
    else:
        result = run_eval(utts, refs, vocab, cfg, jobs=args.jobs)
        files, code = bundle_files(result), EXIT_UNDEFINED if result.all_undefined() else EXIT_OK
        for w in result.warnings:
            log.warning(w)
    write_files(files, Path(args.out_dir))
    sys.stdout.write(files["summary.tsv"])
    if code == EXIT_UNDEFINED:
        log.error("no configuration has both correct and incorrect words; two-class metrics are null")
    return code


def cmd_transfer(args) -> int:
    cfg = run_config(args)
    vocab = fio.load_vocab(args.vocab)
    cal = _load(args.cal_posteriors, args.cal_refs, args.format)
    ev = _load(args.eval_posteriors, args.eval_refs, args.format)
    if args.server:
        from .service.schemas import Dataset, RunConfigModel, TransferRequest, UtteranceModel, VocabModel

        def dataset(d):
            return Dataset(utterances=[UtteranceModel.from_utterance(u) for u in d[0]], references=d[1])

        req = TransferRequest(
            calibration=dataset(cal), evaluation=dataset(ev), vocab=VocabModel.from_vocab(vocab),
            config=RunConfigModel.from_config(cfg), jobs=args.jobs,
        )
        files = _remote(args.server, "/transfer", req)["files"]
        rows_defined = any(r["tnr"] is not None for r in json.loads(files["transfer.json"])["results"])
    else:
        rows = run_transfer(cal, ev, vocab, cfg, jobs=args.jobs)
        files = transfer_files(rows, cfg)
        rows_defined = any(r.tnr is not None for r in rows)
    write_files(files, Path(args.out_dir))
    sys.stdout.write(files["transfer.tsv"])
    return EXIT_OK if rows_defined else EXIT_UNDEFINED


def cmd_synth(args) -> int:
    overrides = {
        k: v
        for k, v in dict(
            mode=args.mode,
            seed=args.seed,
            n_utterances=args.n_utterances,
            words_per_utterance=args.words_per_utterance,
            vocab_size=args.vocab_size,
            error_rate=args.error_rate,
            sharpness=args.sharpness,
            pure_noise=args.pure_noise,
        ).items()
        if v is not None
    }
    cfg = overconfident_preset(**overrides) if args.preset == "overconfident" else SynthConfig(**overrides)
    utts, refs, vocab = generate(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "binary":
        fio.write_binary(utts, out / "posteriors.bin", vocab.size)
    else:
        fio.write_ndjson(utts, out / "posteriors.ndjson")
    fio.write_references(refs, out / "refs.tsv")
    fio.save_vocab(vocab, out / "vocab.json")
    with open(out / "synth_config.json", "w", encoding="utf-8") as fh:
        fh.write(fio.dump_json(cfg.to_dict()))
    print(f"wrote {len(utts)} utterances to {out}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    results = run_all(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("entconf.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "synth": cmd_synth,
    "oracle-check": cmd_oracle_check,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (fio.SchemaError, UndefinedMetricError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_SCHEMA
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_SCHEMA
