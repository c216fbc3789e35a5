import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsetrain.classifier import (CorruptModelError, ForestModel, ForestParams, SchemaMismatchError,
                                   SingleClassError, Tree, load_model, predict, predict_scores,
                                   save_model, train_forest)
from pulsetrain.features import FEATURE_NAMES, FeatureVector


def _toy(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    X[:, 0] += np.where(np.arange(n) % 2, 1.5, -1.5)
    y = (np.arange(n) % 2).astype(int)
    return X, y


def _leaf_tree(minke, non):
    t = Tree()
    t._add(counts=(non, minke))
    return t


def test_separable_toy_set_fits_exactly():
    X, y = _toy()
    model = train_forest(X, ForestParams(seed=3), labels=y, feature_order=("a", "b"))
    np.testing.assert_array_equal((predict_scores(model, X) >= 0.5).astype(int), y)
    assert [predict(model, x).label for x in X[:4]] == ["non-minke", "minke"] * 2
    assert model.oob_accuracy == 1.0


def test_single_class_rejected():
    X, _ = _toy(20)
    with pytest.raises(SingleClassError):
        train_forest(X, labels=np.ones(20, int), feature_order=("a", "b"))


def test_same_seed_same_model(tmp_path):
    X, y = _toy(seed=1)
    X = X + np.random.default_rng(2).normal(0, 0.8, X.shape)  # make the trees non-trivial
    paths = []
    for k in range(2):
        p = tmp_path / f"m{k}.json"
        save_model(train_forest(X, ForestParams(seed=9), labels=y, feature_order=("a", "b")), p)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    other = tmp_path / "other.json"
    save_model(train_forest(X, ForestParams(seed=10), labels=y, feature_order=("a", "b")), other)
    assert other.read_bytes() != paths[0].read_bytes()


def test_vote_arithmetic():
    pure = ForestModel([_leaf_tree(5, 0)], ForestParams(n_trees=1), ("a",))
    assert predict(pure, [0.0]) == predict(pure, np.array([0.0]))
    assert predict(pure, [0.0]).score == 1.0
    trees = [_leaf_tree(3, 1)] * 7 + [_leaf_tree(1, 3)] * 3
    model = ForestModel(trees, ForestParams(), ("a",))
    p = predict(model, [0.0])
    assert p.score == pytest.approx(0.7) and p.label == "minke"
    assert predict(model, [0.0], decision_threshold=0.8).label == "non-minke"
    # a tied leaf does not vote minke
    assert predict(ForestModel([_leaf_tree(2, 2)], ForestParams(n_trees=1), ("a",)), [0.0]).score == 0.0


def _fvs(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        v = rng.normal(0, 1, 18)
        v[3] += 2.0 if i % 2 else -2.0
        out.append(FeatureVector.from_array(v, "minke" if i % 2 else "non-minke"))
    return out


def test_save_load_roundtrip(tmp_path):
    model = train_forest(_fvs(120, 0), ForestParams(seed=4))
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    X = np.random.default_rng(5).normal(0, 2, (100, 18))
    assert [predict(model, x) for x in X] == [predict(back, x) for x in X]
    assert back.feature_order == FEATURE_NAMES
    assert back.training_fingerprint == model.training_fingerprint


def test_corrupt_and_mismatched_files(tmp_path):
    model = train_forest(_fvs(60, 1), ForestParams(seed=4))
    path = tmp_path / "model.json"
    save_model(model, path)
    text = path.read_text()
    bad = tmp_path / "trunc.json"
    bad.write_text(text[:len(text) // 2])
    with pytest.raises(CorruptModelError):
        load_model(bad)
    d = json.loads(text)
    d["feature_order"] = list(reversed(d["feature_order"]))
    swapped = tmp_path / "swapped.json"
    swapped.write_text(json.dumps(d))
    with pytest.raises(SchemaMismatchError):
        load_model(swapped)
    d = json.loads(text)
    d["version"] = 99
    future = tmp_path / "future.json"
    future.write_text(json.dumps(d))
    with pytest.raises(SchemaMismatchError):
        load_model(future)
    with pytest.raises(SchemaMismatchError):
        predict_scores(model, np.zeros((1, 5)))


def test_oob_tracks_holdout_accuracy():
    train, test = _fvs(300, 2), _fvs(300, 3)
    for fv in train + test:  # overlap the classes so accuracy is informative
        fv.f4_num_clicks += np.random.default_rng(int(abs(fv.f1_delta_time_s) * 1e6)).normal(0, 1.5)
    model = train_forest(train, ForestParams(n_trees=25, seed=0))
    X = np.array([f.to_array() for f in test])
    y = np.array([f.label == "minke" for f in test])
    holdout = np.mean((predict_scores(model, X) >= 0.5) == y)
    assert abs(model.oob_accuracy - holdout) <= 0.15


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n=st.integers(4, 40))
def test_duplicate_points_give_consistent_trees(seed, n):
    rng = np.random.default_rng(seed)
    X = np.repeat(rng.normal(0, 1, (n // 2, 3)), 2, axis=0)
    y = np.tile([0, 1], n // 2)
    y[:2] = [0, 1]
    X[:2] = X[0]  # one contradictory duplicate pair
    model = train_forest(X, ForestParams(n_trees=3, seed=seed % 1000), labels=y,
                         feature_order=("a", "b", "c"))
    scores = predict_scores(model, X)
    assert np.all((scores >= 0) & (scores <= 1))
    assert scores[0] == scores[1]
