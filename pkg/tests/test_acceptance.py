"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into an "acceptance criteria" section of the
pytest terminal summary.
"""

import json
import time

import numpy as np

import reference_measures as ref
from conftest import random_simplex, record_criterion
from entconf.checks import check_auc_nt_identity, check_auc_roc, check_levenshtein, check_youden
from entconf.cli import main
from entconf.measures import (
    DEFAULT_ALPHAS,
    RECOMMENDED,
    MeasureConfig,
    MeasureKind,
    Normalization,
    all_variants,
    confidence,
    confidence_gibbs_exp,
    confidence_gibbs_lin,
    confidence_renyi_exp,
    confidence_renyi_lin,
    confidence_tsallis_exp,
    confidence_tsallis_lin,
)
from entconf.metrics import tnr_transfer, youden_stats
from entconf.pipeline import RunConfig, merge_arrays, run_eval, run_transfer, score_corpus
from entconf.synth import SynthConfig, generate, incorrect_step_max_probs, overconfident_preset

THIRD = 1.0 / 3.0
MAX_PROB = MeasureConfig(MeasureKind.MAX_PROB)


def variants():
    """All seven measures, with the Tsallis and Renyi ones at each default alpha."""
    out = list(all_variants(DEFAULT_ALPHAS[0]))
    for a in DEFAULT_ALPHAS[1:]:
        out += [c for c in all_variants(a) if c.alpha is not None]
    return out


def test_criterion_1_endpoints_and_range():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_end = 0.0
    lo, hi = np.inf, -np.inf
    for v in (2, 5, 128, 1024):
        uniform = np.full(v, 1.0 / v)
        one_hot = np.zeros(v)
        one_hot[0] = 1.0
        # Mix flat and very peaked rows so both ends of [0, 1] are exercised.
        samples = np.concatenate(
            [random_simplex(rng, 5000, v, 1.0), random_simplex(rng, 5000, v, 0.01)]
        )
        for cfg in variants():
            worst_end = max(worst_end, abs(confidence(uniform, cfg)), abs(confidence(one_hot, cfg) - 1.0))
        for cfg in all_variants(THIRD):
            c = confidence(samples, cfg)
            lo, hi = min(lo, float(c.min())), max(hi, float(c.max()))
    elapsed = time.perf_counter() - start
    ok = worst_end <= 1e-12 and lo >= 0.0 and hi <= 1.0 and elapsed < 5.0
    record_criterion(
        1, ok, f"endpoint err {worst_end:.1e}, range [{lo:.3g}, {hi:.3g}] over 1e4 samples x 4 V, {elapsed:.2f}s"
    )
    assert ok


def test_criterion_2_alpha_limit():
    rng = np.random.default_rng(2)
    worst = 0.0
    for v in (2, 5, 128, 1024):
        p = random_simplex(rng, 250, v)
        g = confidence_gibbs_lin(p)
        for a in (1 - 1e-6, 1 + 1e-6):
            worst = max(worst, float(np.max(np.abs(confidence_tsallis_lin(p, a) - g))))
            worst = max(worst, float(np.max(np.abs(confidence_renyi_lin(p, a) - g))))
    ok = worst <= 1e-4
    record_criterion(2, ok, f"max |F(alpha=1+-1e-6) - F_gibbs_lin| = {worst:.2e} on 1000 distributions")
    assert ok


def test_criterion_3_worked_values():
    p = [0.9, 0.1]
    want = ref.worked_values(THIRD)
    got = {
        "gibbs_lin": confidence_gibbs_lin(p),
        "gibbs_exp": confidence_gibbs_exp(p),
        "tsallis_lin": confidence_tsallis_lin(p, THIRD),
        "tsallis_exp": confidence_tsallis_exp(p, THIRD),
        "renyi_lin": confidence_renyi_lin(p, THIRD),
        "renyi_exp": confidence_renyi_exp(p, THIRD),
    }
    worst = max(abs(got[k] - want[k]) for k in want)
    listed = {"gibbs_lin": 0.53100, "gibbs_exp": 0.44494, "tsallis_lin": 0.26856,
              "tsallis_exp": 0.18887, "renyi_lin": 0.22623, "renyi_exp": 0.17000}
    off = {k: round(abs(got[k] - v), 6) for k, v in listed.items() if abs(got[k] - v) > 1e-4}
    ok = worst <= 1e-4
    detail = f"max |package - reference script| = {worst:.1e}"
    if off:
        # renyi_lin: 1 + log2(1.429648)/(-2/3) is 0.22651, not the listed 0.22623.
        detail += f"; listed values off by more than 1e-4: {off}"
    record_criterion(3, ok, detail)
    assert ok


def test_criterion_4_oracle_equivalence():
    rng = np.random.default_rng(4)
    results = [check_auc_roc(rng, 100, 200), check_levenshtein(rng, 500, 8), check_youden(rng, 20, 200, 1e-3)]
    ok = all(r.passed for r in results)
    record_criterion(4, ok, "; ".join(f"{r.name}: {r.detail}" for r in results))
    assert ok


def test_criterion_5_auc_nt_identity():
    res = check_auc_nt_identity(np.random.default_rng(5), 100, 200)
    record_criterion(5, res.passed, res.detail)
    assert res.passed


def test_criterion_6_overconfident_preset():
    start = time.perf_counter()
    cfg_run = RunConfig(measures=all_variants(THIRD), aggregations=["min", "prod"])
    rows, flags, medians, wers = [], {}, [], []
    constant_ok = True
    for seed in range(5):
        cfg = overconfident_preset(seed=seed)
        utts, refs, vocab = generate(cfg)
        medians.append(float(np.median(incorrect_step_max_probs(utts, refs, vocab, cfg.mode))))
        result = run_eval(utts, refs, vocab, cfg_run)
        wers.append(result.alignment.wer)
        best = result.pair(RECOMMENDED, "min").report
        base = result.pair(MAX_PROB, "prod").report
        rows.append((best.auc_nt, base.auc_nt, best.auc_yc, base.auc_yc))
        # Constant-score estimator on the same labels.
        conf, correct = merge_arrays(score_corpus(utts, refs, vocab, RunConfig(measures=[MAX_PROB], aggregations=["min"])), 0)
        constant_ok &= youden_stats((np.full(conf.size, 1.0 - result.alignment.wer), correct))[0] == 0.0
        for p in result.pairs:
            if p.measure.normalization is Normalization.LINEAR:
                flags.setdefault(p.label, []).append(p.report.spectrum_flag)
    elapsed = time.perf_counter() - start

    a_ok = all(nt_b > nt_m and yc_b > yc_m for nt_b, nt_m, yc_b, yc_m in rows)
    preset_ok = min(medians) > 0.9
    ok = a_ok and constant_ok and preset_ok and elapsed < 120.0
    nt = ", ".join(f"{r[0]:.3f}>{r[1]:.3f}" for r in rows)
    yc = ", ".join(f"{r[2]:.3f}>{r[3]:.3f}" for r in rows)
    record_criterion(
        6, ok,
        f"(a) AUC_NT tsallis-exp-min vs max_prob-prod [{nt}]; AUC_YC [{yc}]; "
        f"(b) constant estimator AUC_YC == 0: {constant_ok}; "
        f"incorrect-step median max-prob min {min(medians):.5f}; WER {min(wers):.3f}-{max(wers):.3f}; {elapsed:.1f}s",
    )
    flagged = sorted(k for k, v in flags.items() if any(v))
    record_criterion(
        "6c", True,
        f"spectrum_flag over 5 seeds for {len(flags)} linear configs; flagged: {flagged or 'none'}",
    )
    assert ok


def test_criterion_7_threshold_transfer():
    run = RunConfig(measures=all_variants(THIRD), aggregations=["min", "prod"])
    cal = generate(SynthConfig(seed=70, n_utterances=300))
    noise = generate(SynthConfig(seed=71, n_utterances=100, pure_noise=True))
    rows = run_transfer(cal[:2], noise[:2], cal[2], run)
    drill_ok = all(r.tau is not None and r.calibration_fnr <= 0.05 and r.tnr is not None for r in rows)
    worst_fnr = max(r.calibration_fnr for r in rows)
    tnrs = ", ".join(f"{r.label}={r.tnr:.3f}" for r in rows if r.aggregation.value == "min")

    # Perfectly separated scores: very sharp correct streams, near-uniform noise.
    sharp = generate(SynthConfig(seed=72, n_utterances=50, error_rate=0.0, sharpness=400.0))
    flat = generate(SynthConfig(seed=73, n_utterances=50, pure_noise=True, sharpness=0.01))
    perfect = run_transfer(sharp[:2], flat[:2], sharp[2], RunConfig(measures=[MAX_PROB, RECOMMENDED], aggregations=["min"]))
    direct = tnr_transfer((np.ones(40), np.ones(40, dtype=bool)), (np.zeros(10), np.zeros(10, dtype=bool)), 0.05)
    perfect_ok = all(r.tnr == 1.0 for r in perfect) and direct.tnr == 1.0 and direct.tau == 1.0

    ok = drill_ok and perfect_ok
    record_criterion(
        7, ok,
        f"calibration FNR <= 0.05 on all {len(rows)} configs (max {worst_fnr:.4f}); noise TNR {tnrs}; "
        f"perfectly separated TNR = {[r.tnr for r in perfect] + [direct.tnr]}",
    )
    assert ok


def test_criterion_8_determinism(tmp_path):
    data = tmp_path / "data"
    assert main(["synth", "--out-dir", str(data), "--n-utterances", "300", "--seed", "8"]) == 0
    base = ["eval", "--posteriors", str(data / "posteriors.ndjson"), "--refs", str(data / "refs.tsv"),
            "--vocab", str(data / "vocab.json")]
    assert main(base + ["--out-dir", str(tmp_path / "serial"), "--jobs", "1"]) == 0
    assert main(base + ["--out-dir", str(tmp_path / "parallel"), "--jobs", "4"]) == 0

    def tree(root):
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    serial, parallel = tree(tmp_path / "serial"), tree(tmp_path / "parallel")
    ok = serial == parallel and len(serial) > 2
    n_cfg = len(json.loads(serial["report.json"])["results"])
    record_criterion(8, ok, f"{len(serial)} files ({n_cfg} configurations) byte-identical for --jobs 1 vs 4")
    assert ok
