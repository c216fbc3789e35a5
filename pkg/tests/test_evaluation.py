import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsetrain.evaluation import (ConfusionMatrix, EmptyClassAfterSplitError, EvaluationError, Interval,
                                   OneClassLabelsError, OverlappingTruthError, compute_metrics,
                                   f1_score, match_events_to_truth, pairwise_auc, roc_auc,
                                   split_train_test)


def test_matching_examples():
    cm = match_events_to_truth([(10, 40)], [Interval(12, 45)], n_slices=10)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 0, 0, 9)
    cm = match_events_to_truth([(10, 40)], [Interval(41, 70)], n_slices=10)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (0, 1, 1, 8)
    cm = match_events_to_truth([], [Interval(0, 1), Interval(2, 3), Interval(4, 5)])
    assert (cm.tp, cm.fp, cm.fn) == (0, 0, 3)
    with pytest.raises(OverlappingTruthError):
        match_events_to_truth([], [Interval(0, 10), Interval(5, 15)])


def test_metric_identities():
    assert f1_score(0.84, 0.63) == pytest.approx(0.72, abs=0.005)
    m = compute_metrics(ConfusionMatrix(tp=10, fp=104, tn=1000, fn=5, hours=120))
    assert m.fp_per_hour == pytest.approx(0.8667, abs=5e-4)
    perfect = compute_metrics(ConfusionMatrix(5, 0, 10, 0, 1.0))
    assert (perfect.tpr, perfect.fpr, perfect.ppv, perfect.f1) == (1, 0, 1, 1)


def test_zero_denominators_are_flagged():
    m = compute_metrics(ConfusionMatrix(0, 0, 0, 0, 1.0))
    assert m.tpr == m.ppv == m.fpr == 0.0
    assert {"tpr:zero-denominator", "ppv:zero-denominator", "fpr:zero-denominator"} <= set(m.flags)
    with pytest.raises(EvaluationError):
        compute_metrics(ConfusionMatrix(1, 1, 1, 1, 0.0))


def test_auc_examples():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])[3] == 1.0
    assert roc_auc([0.5] * 6, [1, 0, 1, 0, 1, 0])[3] == 0.5
    assert roc_auc([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0])[3] == 0.75
    with pytest.raises(OneClassLabelsError):
        roc_auc([0.1, 0.2], [1, 1])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.booleans()), min_size=2, max_size=60))
def test_auc_equals_pairwise_concordance(pairs):
    scores = [s / 8 for s, _ in pairs]
    labels = [y for _, y in pairs]
    if all(labels) or not any(labels):
        return
    thr, fpr, tpr, auc = roc_auc(scores, labels)
    assert auc == pairwise_auc(scores, labels)
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0, 0, 1, 1)
    assert np.all(np.diff(thr) < 0)
    perm = np.random.default_rng(len(pairs)).permutation(len(pairs))
    assert roc_auc(np.array(scores)[perm], np.array(labels)[perm])[3] == auc


def test_split_counts_and_determinism():
    labels = ["minke"] * 150 + ["non-minke"] * 150
    tr, te = split_train_test(labels, 0.66, seed=4)
    assert len(tr) == 198 and len(te) == 102
    assert sum(labels[i] == "minke" for i in tr) == 99
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(300))
    tr2, te2 = split_train_test(labels, 0.66, seed=4)
    np.testing.assert_array_equal(tr, tr2)
    np.testing.assert_array_equal(te, te2)
    with pytest.raises(EmptyClassAfterSplitError):
        split_train_test(["minke"] * 3, 0.999, seed=0)
