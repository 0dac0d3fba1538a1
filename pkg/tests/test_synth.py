import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entconf import io as fio
from entconf.decode import DecodeMode, greedy_tokens
from entconf.measures import all_variants, confidence
from entconf.pipeline import RunConfig, run_eval, score_corpus
from entconf.synth import (
    SynthConfig,
    _render,
    build_vocab,
    generate,
    incorrect_step_max_probs,
    oracle_levenshtein,
    overconfident_preset,
)
from entconf.words import detokenize

SMALL = dict(n_utterances=40, words_per_utterance=6)


def decoded_words(utt, vocab, mode):
    if not utt.steps.size:
        return []
    tokens = greedy_tokens(np.argmax(utt.steps, axis=1), vocab.blank_id, mode)
    return detokenize(tokens, vocab)


class TestGenerate:
    def test_deterministic_bytes(self, tmp_path):
        cfg = SynthConfig(seed=7, **SMALL)
        for name in ("a", "b"):
            utts, refs, vocab = generate(cfg)
            fio.write_ndjson(utts, tmp_path / f"{name}.ndjson")
            fio.write_binary(utts, tmp_path / f"{name}.bin", vocab.size)
            fio.write_references(refs, tmp_path / f"{name}.tsv")
        for ext in ("ndjson", "bin", "tsv"):
            assert (tmp_path / f"a.{ext}").read_bytes() == (tmp_path / f"b.{ext}").read_bytes()

    def test_seed_changes_output(self):
        a, _, _ = generate(SynthConfig(seed=1, **SMALL))
        b, _, _ = generate(SynthConfig(seed=2, **SMALL))
        assert not np.array_equal(a[0].steps, b[0].steps)

    def test_subset_equals_full(self):
        cfg = SynthConfig(seed=3, **SMALL)
        full, refs, _ = generate(cfg)
        part, part_refs, _ = generate(cfg, indices=[5, 17, 2])
        for u in part:
            k = int(u.id[3:])
            assert np.array_equal(u.steps, full[k].steps)
            assert part_refs[u.id] == refs[u.id]

    @pytest.mark.parametrize("mode", ["ctc", "rnnt"])
    def test_no_errors_means_zero_wer(self, mode):
        cfg = SynthConfig(seed=11, error_rate=0.0, mode=mode, **SMALL)
        utts, refs, vocab = generate(cfg)
        for u in utts:
            assert decoded_words(u, vocab, DecodeMode(mode)) == refs[u.id]
        result = run_eval(utts, refs, vocab, RunConfig(mode=mode, measures=all_variants()[:1], aggregations=["min"]))
        assert result.alignment.wer == 0.0

    def test_rows_are_distributions(self):
        utts, _, vocab = generate(SynthConfig(seed=4, **SMALL))
        for u in utts:
            assert u.steps.shape[1] == vocab.size
            assert np.allclose(u.steps.sum(axis=1), 1.0, atol=1e-9)

    def test_sharp_limit(self):
        utts, _, _ = generate(SynthConfig(seed=5, sharpness=400.0, n_utterances=5, words_per_utterance=4))
        steps = np.concatenate([u.steps for u in utts])
        for cfg in all_variants(1 / 3):
            assert np.min(confidence(steps, cfg)) > 1 - 1e-6

    def test_pure_noise(self):
        utts, refs, vocab = generate(SynthConfig(seed=6, pure_noise=True, **SMALL))
        assert all(r == [] for r in refs.values())
        results = score_corpus(utts, refs, vocab, RunConfig(measures=all_variants()[:1], aggregations=["min"]))
        kinds = {k.value for r in results for k in r.kinds}
        assert kinds == {"insertion"}

    def test_error_rate_roughly_respected(self):
        utts, refs, vocab = generate(SynthConfig(seed=8, n_utterances=300, words_per_utterance=10, error_rate=0.1))
        result = run_eval(utts, refs, vocab, RunConfig(measures=all_variants()[:1], aggregations=["min"]))
        assert 0.05 < result.alignment.wer < 0.2

    @pytest.mark.parametrize("kwargs", [dict(vocab_size=3), dict(error_rate=1.0), dict(sharpness=0.0), dict(blank_id=200)])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            SynthConfig(**kwargs)


@settings(max_examples=100, deadline=None)
@given(
    tokens=st.lists(st.integers(1, 15), max_size=12),
    mode=st.sampled_from(["ctc", "rnnt"]),
    seed=st.integers(0, 2**32 - 1),
)
def test_render_decodes_to_intended_units(tokens, mode, seed):
    cfg = SynthConfig(vocab_size=16, mode=mode, max_repeat=3, max_blank_run=2)
    rng = np.random.default_rng(seed)
    units = [(t, bool(rng.random() < 0.8)) for t in tokens]
    steps = _render(rng, cfg, units)
    got = greedy_tokens(np.argmax(steps, axis=1), 0, cfg.mode) if steps.size else []
    assert got == tokens


def test_overconfident_preset_median():
    cfg = overconfident_preset(seed=0, n_utterances=400)
    utts, refs, vocab = generate(cfg)
    probs = incorrect_step_max_probs(utts, refs, vocab, cfg.mode)
    assert probs.size > 50
    assert np.median(probs) > 0.9


def test_vocab_shape():
    vocab = build_vocab(128)
    assert vocab.size == 128 and vocab.blank_id == 0
    begins = sum(t.word_begin for t in vocab.tokens)
    assert 60 <= begins <= 64


class TestOracles:
    def test_levenshtein_examples(self):
        assert oracle_levenshtein("abc", "abc") == 0
        assert oracle_levenshtein(["a", "x", "c"], ["a", "b", "c"]) == 1
        assert oracle_levenshtein([], ["a", "b"]) == 2

    def test_levenshtein_guard(self):
        with pytest.raises(ValueError):
            oracle_levenshtein("a" * 13, "a")
