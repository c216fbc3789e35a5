"""
Random forest of CART trees (Gini impurity) for minke / non-minke events.

Every tree is grown on a bootstrap resample; at each node a fresh random
subset of ``n_split_features`` features is searched for the best axis-aligned
split, with thresholds at midpoints between consecutive distinct values.
Ties in impurity go to the lowest feature index, then the lowest threshold.
Tree ``i`` draws all its randomness from SeedSequence([seed, i]), so growing
trees in any order gives the same forest.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .features import FEATURE_NAMES, FeatureVector

SCHEMA_VERSION = 1
CLASSES = ("non-minke", "minke")


class ClassifierError(ValueError):
    pass


class SingleClassError(ClassifierError):
    pass


class EmptyDataError(ClassifierError):
    pass


class CorruptModelError(ClassifierError):
    pass


class SchemaMismatchError(ClassifierError):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 10
    n_split_features: int = 5
    max_depth: Optional[int] = None
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 1 <= self.n_split_features <= len(FEATURE_NAMES):
            raise ValueError(f"n_split_features must be in [1, {len(FEATURE_NAMES)}]")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@dataclass
class Tree:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf."""
    feature: List[int] = field(default_factory=list)
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    counts: List[List[int]] = field(default_factory=list)

    def _add(self, feature=-1, threshold=0.0, counts=(0, 0)) -> int:
        self.feature.append(int(feature))
        self.threshold.append(float(threshold))
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append([int(c) for c in counts])
        return len(self.feature) - 1

    def leaf_counts(self, x: np.ndarray) -> List[int]:
        i = 0
        while self.feature[i] >= 0:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return self.counts[i]

    def vote(self, x: np.ndarray) -> int:
        non, minke = self.leaf_counts(x)
        return 1 if minke > non else 0

    def to_dict(self) -> dict:
        nodes = []
        for i in range(len(self.feature)):
            if self.feature[i] < 0:
                nodes.append({"counts": self.counts[i]})
            else:
                nodes.append({"feature": self.feature[i], "threshold": self.threshold[i],
                              "left": self.left[i], "right": self.right[i],
                              "counts": self.counts[i]})
        return {"nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        t = cls()
        for node in d["nodes"]:
            i = t._add(node.get("feature", -1), node.get("threshold", 0.0), node["counts"])
            t.left[i] = int(node.get("left", -1))
            t.right[i] = int(node.get("right", -1))
        return t


@dataclass
class ForestModel:
    trees: List[Tree]
    params: ForestParams
    feature_order: Sequence[str] = FEATURE_NAMES
    training_fingerprint: str = ""
    oob_accuracy: Optional[float] = None


@dataclass(frozen=True)
class Prediction:
    label: str
    score: float


def _gini_cost(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """n_L * gini_L + n_R * gini_R for arrays of per-class counts (..., 2)."""
    nl = left.sum(axis=-1)
    nr = right.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        gl = nl - np.where(nl > 0, (left ** 2).sum(axis=-1) / nl, 0.0)
        gr = nr - np.where(nr > 0, (right ** 2).sum(axis=-1) / nr, 0.0)
    return gl + gr


def _best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray, min_leaf: int):
    """Best (feature, threshold, cost) over ``feats`` (ascending), or None."""
    n = len(y)
    total = np.array([np.sum(y == 0), np.sum(y == 1)], dtype=np.float64)
    best = None
    for f in feats:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        onehot = np.stack([ys == 0, ys == 1], axis=1).astype(np.float64)
        left = np.cumsum(onehot, axis=0)[:-1]  # counts left of boundary i|i+1
        right = total - left
        valid = xs[1:] > xs[:-1]
        sizes = np.arange(1, n)
        valid &= (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not valid.any():
            continue
        cost = _gini_cost(left, right)
        cost[~valid] = np.inf
        i = int(np.argmin(cost))  # first minimum = lowest threshold
        if best is None or cost[i] < best[2]:
            thr = 0.5 * (xs[i] + xs[i + 1])
            if not thr < xs[i + 1]:  # midpoint rounded up onto the upper value
                thr = xs[i]
            best = (int(f), float(thr), float(cost[i]))
    return best


def _grow_tree(X: np.ndarray, y: np.ndarray, params: ForestParams,
               rng: np.random.Generator) -> Tree:
    d = X.shape[1]
    k = min(params.n_split_features, d)
    tree = Tree()
    root = tree._add(counts=(np.sum(y == 0), np.sum(y == 1)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        pure = yn.min() == yn.max()
        if pure or len(idx) < 2 * params.min_leaf or (
                params.max_depth is not None and depth >= params.max_depth):
            continue
        feats = np.sort(rng.choice(d, size=k, replace=False))
        split = _best_split(X[idx], yn, feats, params.min_leaf)
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        tree.feature[node], tree.threshold[node] = f, thr
        tree.left[node] = tree._add(counts=(np.sum(y[li] == 0), np.sum(y[li] == 1)))
        tree.right[node] = tree._add(counts=(np.sum(y[ri] == 0), np.sum(y[ri] == 1)))
        # right pushed first so the left subtree is expanded first
        stack.append((tree.right[node], ri, depth + 1))
        stack.append((tree.left[node], li, depth + 1))
    return tree


def _as_xy(data, labels=None):
    if labels is None:
        X = np.array([fv.to_array() for fv in data], dtype=np.float64)
        labels = [fv.label for fv in data]
    else:
        X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataError("no training examples")
    if not np.all(np.isfinite(X)):
        raise ClassifierError("non-finite feature values")
    y = np.array([encode_label(v) for v in labels], dtype=np.int64)
    return X, y


def encode_label(value) -> int:
    if isinstance(value, (int, np.integer)) and value in (0, 1):
        return int(value)
    if value in CLASSES:
        return CLASSES.index(value)
    raise ClassifierError(f"unknown label {value!r}")


def fingerprint(X: np.ndarray, y: np.ndarray, params: ForestParams, feature_order) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(y, dtype="<i8").tobytes())
    h.update(json.dumps(asdict(params), sort_keys=True).encode())
    h.update("\n".join(feature_order).encode())
    return h.hexdigest()


def feature_schema_hash(feature_order) -> str:
    return hashlib.sha256("\n".join(feature_order).encode()).hexdigest()[:16]


def train_forest(data, params: ForestParams = ForestParams(), labels=None,
                 feature_order=None) -> ForestModel:
    """Train on FeatureVectors (labels taken from them) or on an (n, d) matrix + labels."""
    X, y = _as_xy(data, labels)
    if len(y) < 2:
        raise EmptyDataError("need at least two examples")
    if y.min() == y.max():
        raise SingleClassError(f"all examples are {CLASSES[y[0]]!r}")
    if feature_order is None:
        feature_order = FEATURE_NAMES if X.shape[1] == len(FEATURE_NAMES) else \
            tuple(f"x{i}" for i in range(X.shape[1]))
    if len(feature_order) != X.shape[1]:
        raise ClassifierError("feature_order does not match data width")

    n = len(y)
    trees = []
    oob_votes = np.zeros((n, 2))
    for t in range(params.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([params.seed, t]))
        boot = rng.integers(0, n, size=n)
        tree = _grow_tree(X[boot], y[boot], params, rng)
        trees.append(tree)
        oob = np.setdiff1d(np.arange(n), boot)
        for i in oob:
            oob_votes[i, tree.vote(X[i])] += 1
    seen = oob_votes.sum(axis=1) > 0
    oob_acc = None
    if seen.any():
        oob_pred = (oob_votes[seen, 1] > oob_votes[seen, 0]).astype(np.int64)
        oob_acc = float(np.mean(oob_pred == y[seen]))
    return ForestModel(trees, params, tuple(feature_order),
                       fingerprint(X, y, params, feature_order), oob_acc)


def predict_scores(model: ForestModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not np.all(np.isfinite(X)):
        raise ClassifierError("non-finite feature values")
    if X.shape[1] != len(model.feature_order):
        raise SchemaMismatchError(f"model expects {len(model.feature_order)} features, got {X.shape[1]}")
    votes = np.array([[tree.vote(x) for tree in model.trees] for x in X], dtype=np.float64)
    return votes.sum(axis=1) / len(model.trees)


def predict(model: ForestModel, fv, decision_threshold: float = 0.5) -> Prediction:
    x = fv.to_array() if isinstance(fv, FeatureVector) else np.asarray(fv, dtype=np.float64)
    score = float(predict_scores(model, x[None, :])[0])
    return Prediction(CLASSES[1] if score >= decision_threshold else CLASSES[0], score)


def model_to_dict(model: ForestModel) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "params": asdict(model.params),
        "feature_order": list(model.feature_order),
        "feature_schema": feature_schema_hash(model.feature_order),
        "training_fingerprint": model.training_fingerprint,
        "oob_accuracy": model.oob_accuracy,
        "classes": list(CLASSES),
        "trees": [t.to_dict() for t in model.trees],
    }


def save_model(model: ForestModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> ForestModel:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptModelError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise CorruptModelError(f"{path}: not a model object")
    if d.get("version") != SCHEMA_VERSION:
        raise SchemaMismatchError(f"{path}: schema version {d.get('version')}, expected {SCHEMA_VERSION}")
    try:
        order = tuple(d["feature_order"])
        if d["feature_schema"] != feature_schema_hash(order):
            raise SchemaMismatchError(f"{path}: feature_schema does not match feature_order")
        params = ForestParams(**d["params"])
        trees = [Tree.from_dict(t) for t in d["trees"]]
        model = ForestModel(trees, params, order, d["training_fingerprint"], d.get("oob_accuracy"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaMismatchError):
            raise
        raise CorruptModelError(f"{path}: {exc}") from exc
    _check_trees(model)
    return model


def _check_trees(model: ForestModel) -> None:
    d = len(model.feature_order)
    if not model.trees:
        raise CorruptModelError("model has no trees")
    for tree in model.trees:
        n = len(tree.feature)
        for i in range(n):
            f = tree.feature[i]
            if f >= 0:
                if f >= d or not np.isfinite(tree.threshold[i]):
                    raise CorruptModelError("bad split node")
                if not (0 < tree.left[i] < n and 0 < tree.right[i] < n):
                    raise CorruptModelError("dangling child index")
            elif sum(tree.counts[i]) <= 0:
                raise CorruptModelError("empty leaf")
