import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score, roc_auc_score

from entconf.align import ErrorKind, Label, LabeledScore
from entconf.metrics import (
    UndefinedMetricError,
    auc_nt,
    auc_pr,
    auc_roc,
    ece,
    evaluate,
    histogram,
    nce,
    select_threshold,
    tnr_transfer,
    youden_stats,
)
from entconf.synth import oracle_auc_roc, oracle_youden_grid


def data(correct_scores, incorrect_scores):
    conf = list(correct_scores) + list(incorrect_scores)
    return np.array(conf, dtype=float), np.array([True] * len(correct_scores) + [False] * len(incorrect_scores))


@st.composite
def labeled_sets(draw, min_size=2, max_size=60):
    n = draw(st.integers(min_size, max_size))
    # A coarse lattice produces plenty of ties.
    conf = draw(st.lists(st.integers(0, 20), min_size=n, max_size=n))
    correct = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    correct[0], correct[1] = True, False
    return np.array(conf, dtype=float) / 20, np.array(correct)


class TestAucRoc:
    @pytest.mark.parametrize(
        "pos, neg, want", [([0.9, 0.8], [0.1], 1.0), ([0.9, 0.7], [0.8, 0.1], 0.75), ([0.5], [0.5], 0.5)]
    )
    def test_examples(self, pos, neg, want):
        d = data(pos, neg)
        assert auc_roc(d) == want
        assert oracle_auc_roc(*d) == want

    @settings(max_examples=200, deadline=None)
    @given(labeled_sets())
    def test_matches_oracles(self, d):
        assert auc_roc(d) == oracle_auc_roc(d[0].tolist(), d[1].tolist())
        assert auc_roc(d) == pytest.approx(roc_auc_score(d[1], d[0]), abs=1e-12)

    def test_single_class(self):
        with pytest.raises(UndefinedMetricError):
            auc_roc(data([0.3, 0.4], []))

    def test_accepts_labeled_scores(self):
        scores = [
            LabeledScore("u", "a", 0.9, Label.CORRECT, ErrorKind.NONE),
            LabeledScore("u", "b", 0.1, Label.INCORRECT, ErrorKind.INSERTION),
        ]
        assert auc_roc(scores) == 1.0


class TestPrecisionRecall:
    def test_auc_pr_examples(self):
        assert auc_pr(data([0.9, 0.8], [0.1, 0.2])) == 1.0
        assert auc_pr((np.array([0.2, 0.9]), np.array([True, False]))) == 0.5
        assert auc_pr(data([0.4], [])) == 1.0

    def test_auc_nt_examples(self):
        assert auc_nt(data([0.9, 0.8], [0.1, 0.2])) == 1.0
        assert auc_nt((np.array([0.9, 0.2]), np.array([True, False]))) == 1.0
        assert auc_nt((np.array([0.2, 0.9]), np.array([True, False]))) == 0.5

    def test_undefined(self):
        with pytest.raises(UndefinedMetricError):
            auc_pr(data([], [0.3]))
        with pytest.raises(UndefinedMetricError):
            auc_nt(data([0.3], []))

    @settings(max_examples=200, deadline=None)
    @given(labeled_sets())
    def test_against_sklearn(self, d):
        conf, correct = d
        assert auc_pr(d) == pytest.approx(average_precision_score(correct, conf), abs=1e-12)
        assert auc_nt(d) == pytest.approx(average_precision_score(~correct, 1 - conf), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(labeled_sets())
    def test_nt_is_flipped_pr(self, d):
        conf, correct = d
        assert auc_nt(d) == auc_pr((1.0 - conf, ~correct))


class TestNce:
    def test_constant_estimator_is_zero(self):
        conf, correct = data([0.75] * 3, [0.75])
        value, clamped = nce((conf, correct))
        assert abs(value) <= 1e-12
        assert clamped == 0

    def test_hand_value(self):
        value, _ = nce((np.array([0.8, 0.8, 0.2]), np.array([True, True, False])))
        # H_max = 2 log2(3/2) + log2(3); sum of log-likelihoods = 3 log2(0.8).
        h_max = 2 * math.log2(1.5) + math.log2(3)
        assert value == pytest.approx((h_max + 3 * math.log2(0.8)) / h_max, abs=1e-12)
        assert value == pytest.approx(0.6494287756, abs=1e-9)

    def test_perfect_approaches_one(self):
        value, clamped = nce(data([1.0, 1.0], [0.0]))
        assert clamped == 3
        assert 0.999 < value <= 1.0

    def test_can_be_negative(self):
        assert nce(data([0.01], [0.99]))[0] < 0

    def test_single_class(self):
        with pytest.raises(UndefinedMetricError):
            nce(data([0.9], []))


class TestEce:
    def test_example(self):
        assert ece((np.array([0.9, 0.6]), np.array([True, False])), n_bins=2) == pytest.approx(0.25, abs=1e-15)

    def test_calibrated_bins(self):
        assert ece(data([0.75] * 3, [0.75]), n_bins=10) == 0.0
        assert ece(data([1.0, 1.0], []), n_bins=10) == 0.0

    def test_range(self, rng):
        conf = rng.random(500)
        assert 0.0 <= ece((conf, rng.random(500) < 0.5)) <= 1.0


class TestYouden:
    def test_perfect_separator(self):
        auc, peak, std = youden_stats(data([1.0, 1.0], [0.0]))
        assert (auc, peak, std) == (1.0, 1.0, 0.0)

    def test_constant(self):
        assert youden_stats(data([0.6, 0.6], [0.6])) == (0.0, 0.0, 0.0)

    def test_hand_example(self):
        auc, peak, std = youden_stats(data([1.0], [0.5]))
        assert auc == pytest.approx(0.5, abs=1e-15)
        assert peak == 1.0
        assert std == pytest.approx(0.5, abs=1e-15)

    def test_single_class(self):
        with pytest.raises(UndefinedMetricError):
            youden_stats(data([0.6], []))

    @settings(max_examples=40, deadline=None)
    @given(labeled_sets(max_size=80))
    def test_matches_grid(self, d):
        exact = youden_stats(d)
        grid = oracle_youden_grid(*d)
        assert exact[0] == pytest.approx(grid[0], abs=1e-3)
        assert exact[2] == pytest.approx(grid[2], abs=1e-3)
        assert exact[1] == grid[1]

    def test_std_bound(self, rng):
        for _ in range(20):
            conf = rng.random(50)
            correct = rng.random(50) < 0.5
            correct[:2] = [True, False]
            auc, peak, std = youden_stats((conf, correct))
            assert -1.0 <= auc <= 1.0 and 0.0 <= peak <= 1.0 and 0.0 <= std <= 0.5 + 1e-12


class TestInvariance:
    @settings(max_examples=100, deadline=None)
    @given(labeled_sets(), st.randoms(use_true_random=False))
    def test_permutation(self, d, rnd):
        conf, correct = d
        perm = list(range(conf.size))
        rnd.shuffle(perm)
        e = (conf[perm], correct[perm])
        assert auc_roc(d) == auc_roc(e)
        assert auc_pr(d) == auc_pr(e)
        assert auc_nt(d) == auc_nt(e)
        assert nce(d)[0] == pytest.approx(nce(e)[0], abs=1e-12)
        assert ece(d) == pytest.approx(ece(e), abs=1e-12)
        assert youden_stats(d) == pytest.approx(youden_stats(e), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(labeled_sets())
    def test_monotone_transform(self, d):
        conf, correct = d
        e = (conf**2, correct)
        assert auc_roc(d) == auc_roc(e)
        assert auc_pr(d) == auc_pr(e)
        assert auc_nt(d) == auc_nt(e)
        assert youden_stats(d)[1] == youden_stats(e)[1]

    def test_transform_moves_area(self):
        d = data([0.9, 0.8], [0.5, 0.3])
        e = (d[0] ** 4, d[1])
        assert youden_stats(d)[0] != pytest.approx(youden_stats(e)[0])


class TestTransfer:
    def test_perfect(self):
        res = tnr_transfer(data([1.0] * 5, [0.0]), data([], [0.0] * 4), 0.05)
        assert (res.tau, res.tnr) == (1.0, 1.0)
        assert res.warning is None

    def test_twenty_one_words(self):
        cal = data([1.0] * 20 + [0.3], [])
        assert select_threshold(cal, 0.05) == 1.0
        res = tnr_transfer(cal, data([], [0.2, 0.5]), 0.05)
        assert res.calibration_fnr == pytest.approx(1 / 21)
        assert res.tnr == 1.0

    def test_twenty_words_budget_blocks_one(self):
        cal = data([1.0] * 19 + [0.3], [])
        # 1/20 = 0.05 is still within budget.
        assert select_threshold(cal, 0.05) == 1.0
        cal = data([1.0] * 18 + [0.3], [])
        assert select_threshold(cal, 0.05) == 0.3

    def test_hallucination_above_threshold(self):
        cal = data([0.5] * 10 + [0.9] * 10, [])
        res = tnr_transfer(cal, data([], [0.9]), 0.05)
        assert res.tau == 0.5
        assert res.tnr == 0.0

    def test_zero_threshold_warns(self):
        res = tnr_transfer(data([0.0] * 10, []), data([], [0.4]), 0.05)
        assert res.tau == 0.0
        assert res.warning

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=80), st.sampled_from([0.01, 0.05, 0.1, 0.3]))
    def test_largest_feasible_tau(self, ints, budget):
        pos = np.array(ints, dtype=float) / 20
        d = (pos, np.ones(pos.size, dtype=bool))
        tau = select_threshold(d, budget)
        assert np.mean(pos < tau) <= budget
        for cand in np.linspace(0, 1, 201):
            if cand > tau:
                assert np.mean(pos < cand) > budget

    def test_needs_incorrect_in_evaluation(self):
        with pytest.raises(UndefinedMetricError):
            tnr_transfer(data([0.5], []), data([0.5], []), 0.05)


class TestHistogram:
    def test_last_bin(self):
        h = histogram(data([0.99], []), n_bins=10)
        assert h.correct == [0] * 9 + [1]
        assert h.incorrect == [0] * 10

    def test_edge_goes_up(self):
        h = histogram(data([0.5, 1.0, 0.0], []), n_bins=2)
        assert h.correct == [1, 2]
        assert h.edges == [0.0, 0.5, 1.0]

    def test_totals(self, rng):
        conf = rng.random(300)
        correct = rng.random(300) < 0.7
        h = histogram((conf, correct), n_bins=20)
        assert sum(h.correct) == correct.sum()
        assert sum(h.correct) + sum(h.incorrect) == 300


class TestEvaluate:
    def test_single_class_gives_nulls(self):
        r = evaluate(data([0.9, 0.8], []))
        assert r.auc_roc is None and r.auc_nt is None and r.nce is None and r.auc_yc is None
        assert r.auc_pr == 1.0
        assert r.spectrum_flag is None
        assert r.warnings

    def test_spectrum_flag(self, rng):
        conf = rng.random(200)
        correct = rng.random(200) < 0.5
        correct[:2] = [True, False]
        r = evaluate((conf, correct))
        assert r.spectrum_flag == (r.auc_yc < r.std_yc)
        assert r.defined()

    def test_constant_estimator(self):
        r = evaluate(data([0.7] * 9, [0.7]))
        assert r.auc_yc == 0.0 and r.std_yc == 0.0 and r.auc_roc == 0.5
        assert r.spectrum_flag is False
