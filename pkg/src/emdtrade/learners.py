"""Classifiers compared in the experiments: KNN, random forest, gradient boosting,
and the uniform random baseline.

All learners are deterministic given (spec.seed, X, y) and share explicit tie
rules so runs reproduce bitwise. Tree splits test ``x <= v`` against observed
training values, which makes forest and boosting predictions invariant under
strictly increasing per-feature transforms applied to train and test together.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .market_data import DecisionLabel

log = logging.getLogger(__name__)

N_CLASSES = 3


class LearnerKind(str, enum.Enum):
    KNN = "knn"
    RANDOM_FOREST = "random_forest"
    GRADIENT_BOOST = "gradient_boost"
    RANDOM_BASELINE = "random_baseline"


# mtry 0 means floor(sqrt(d)); max_depth 0 means unlimited.
DEFAULT_HYPERPARAMETERS: dict[LearnerKind, dict[str, float]] = {
    LearnerKind.KNN: {"k": 5},
    LearnerKind.RANDOM_FOREST: {"n_trees": 300, "mtry": 0, "min_leaf": 1, "max_depth": 0},
    LearnerKind.GRADIENT_BOOST: {"rounds": 200, "learning_rate": 0.1, "max_depth": 3, "subsample": 1.0},
    LearnerKind.RANDOM_BASELINE: {},
}

_INT_PARAMS = {"k", "n_trees", "mtry", "min_leaf", "max_depth", "rounds"}


@dataclass(frozen=True)
class LearnerSpec:
    """Which classifier to train, its hyperparameters, and its seed."""

    kind: LearnerKind
    seed: int = 0
    hyperparameters: Mapping[str, float] = field(default_factory=dict)

    def resolved(self) -> dict[str, float]:
        """Defaults overlaid with this spec's overrides, validated."""
        defaults = DEFAULT_HYPERPARAMETERS[self.kind]
        merged = dict(defaults)
        for key, value in self.hyperparameters.items():
            if key not in defaults:
                raise ValueError(f"unknown hyperparameter {key!r} for {self.kind.value}")
            merged[key] = int(value) if key in _INT_PARAMS else float(value)
        if self.kind is LearnerKind.KNN and merged["k"] < 1:
            raise ValueError("k must be >= 1")
        if self.kind is LearnerKind.RANDOM_FOREST:
            if merged["n_trees"] < 1 or merged["min_leaf"] < 1:
                raise ValueError("n_trees and min_leaf must be >= 1")
            if merged["mtry"] < 0 or merged["max_depth"] < 0:
                raise ValueError("mtry and max_depth must be >= 0 (0 means default/unlimited)")
        if self.kind is LearnerKind.GRADIENT_BOOST:
            if merged["rounds"] < 0:
                raise ValueError("rounds must be >= 0")
            if merged["learning_rate"] <= 0 or merged["max_depth"] < 1:
                raise ValueError("learning_rate must be positive and max_depth >= 1")
            if not 0.0 < merged["subsample"] <= 1.0:
                raise ValueError("subsample must be in (0, 1]")
        return merged


@dataclass
class TrainedModel:
    """A fitted learner plus the training metadata needed for reporting."""

    spec: LearnerSpec
    n_train: int
    n_features: int
    class_counts: np.ndarray
    state: Any
    warnings: tuple[str, ...] = ()


def train(spec: LearnerSpec, X: np.ndarray, y: np.ndarray) -> TrainedModel:
    """Fit the learner named by spec; deterministic given (spec.seed, X, y)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one label per row")
    if len(y) == 0:
        raise ValueError("empty training set")
    if spec.kind is not LearnerKind.RANDOM_BASELINE and len(y) < 2:
        raise ValueError("need at least 2 training rows")
    if np.any((y < 0) | (y >= N_CLASSES)):
        raise ValueError("labels must be decision codes 0..2")

    warnings: tuple[str, ...] = ()
    class_counts = np.bincount(y, minlength=N_CLASSES)
    if spec.kind is not LearnerKind.RANDOM_BASELINE and np.count_nonzero(class_counts) == 1:
        only = int(np.nonzero(class_counts)[0][0])
        warnings = (f"single-class training set: every prediction will be {DecisionLabel(only).name}",)
        log.warning("%s: %s", spec.kind.value, warnings[0])

    params = spec.resolved()
    if spec.kind is LearnerKind.KNN:
        state = {"X": X.copy(), "y": y.copy(), "k": int(params["k"])}
    elif spec.kind is LearnerKind.RANDOM_FOREST:
        state = _fit_forest(X, y, spec.seed, params)
    elif spec.kind is LearnerKind.GRADIENT_BOOST:
        state = _fit_boost(X, y, spec.seed, params)
    else:
        state = {"seed": spec.seed}
    return TrainedModel(
        spec=spec,
        n_train=len(y),
        n_features=X.shape[1],
        class_counts=class_counts,
        state=state,
        warnings=warnings,
    )


def predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Decision codes for each row, aligned to the input order."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"dimension mismatch: model expects d={model.n_features}, got {X.shape}")
    kind = model.spec.kind
    if kind is LearnerKind.KNN:
        return _knn_predict(model.state, X)
    if kind is LearnerKind.RANDOM_FOREST:
        return _forest_predict(model.state, X)
    if kind is LearnerKind.GRADIENT_BOOST:
        return _boost_predict(model.state, X)
    return random_policy(len(X), model.state["seed"])


def random_policy(n: int, seed: int) -> np.ndarray:
    """I.i.d. uniform decisions over {Sell, Hold, Buy} from a seeded generator."""
    if n < 1:
        raise ValueError("need at least one decision")
    rng = np.random.default_rng(seed)
    return rng.integers(0, N_CLASSES, size=n).astype(np.int64)


# --- KNN ---------------------------------------------------------------------


def _knn_predict(state: dict, X: np.ndarray) -> np.ndarray:
    """Majority vote among the k Euclidean-nearest training rows.

    Distance ties resolve to the lower training index (stable sort); vote ties
    resolve to the class of the single nearest neighbour.
    """
    train_X, train_y, k = state["X"], state["y"], state["k"]
    k_eff = min(k, len(train_y))
    out = np.empty(len(X), dtype=np.int64)
    # squared distances preserve the Euclidean ordering
    chunk = max(1, int(2_000_000 // max(len(train_X), 1)))
    for start in range(0, len(X), chunk):
        block = X[start : start + chunk]
        d2 = ((block[:, None, :] - train_X[None, :, :]) ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        for i in range(len(block)):
            votes = np.bincount(train_y[order[i]], minlength=N_CLASSES)
            top = votes.max()
            if np.count_nonzero(votes == top) > 1:
                out[start + i] = train_y[order[i, 0]]
            else:
                out[start + i] = int(np.argmax(votes))
    return out


# --- CART trees (shared by forest and boosting) --------------------------------


@dataclass
class _Tree:
    """Flat node arrays; feature -1 marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1


def _tree_apply(tree: _Tree, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=float)
    stack = [(0, np.arange(len(X)))]
    while stack:
        node, rows = stack.pop()
        if len(rows) == 0:
            continue
        f = tree.feature[node]
        if f < 0:
            out[rows] = tree.value[node]
            continue
        goes_left = X[rows, f] <= tree.threshold[node]
        stack.append((tree.left[node], rows[goes_left]))
        stack.append((tree.right[node], rows[~goes_left]))
    return out

def _best_split_gini(
    X: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray, min_leaf: int
) -> tuple[float, int, float] | None:
    """Best (weighted Gini, feature, threshold) over 'x <= threshold' splits.

    Candidate features are scanned in ascending index order and thresholds in
    ascending value order; only strictly better impurity replaces the incumbent,
    so ties resolve to the lowest feature index, then the lowest threshold.
    """
    n = len(rows)
    labels = y[rows]
    best: tuple[float, int, float] | None = None
    for f in features:
        x = X[rows, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = labels[order]
        boundaries = np.nonzero(xs[:-1] < xs[1:])[0]
        if boundaries.size == 0:
            continue
        onehot = np.zeros((n, N_CLASSES))
        onehot[np.arange(n), ys] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left_counts = cum[boundaries]
        total = cum[-1]
        n_left = boundaries + 1.0
        n_right = n - n_left
        keep = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not np.any(keep):
            continue
        right_counts = total - left_counts
        gini_left = n_left - (left_counts**2).sum(axis=1) / n_left
        gini_right = n_right - (right_counts**2).sum(axis=1) / n_right
        score = (gini_left + gini_right) / n
        score = np.where(keep, score, np.inf)
        idx = int(np.argmin(score))
        if not np.isfinite(score[idx]):
            continue
        if best is None or score[idx] < best[0]:
            best = (float(score[idx]), int(f), float(xs[boundaries[idx]]))
    return best


def _best_split_sse(
    X: np.ndarray, g: np.ndarray, rows: np.ndarray, features: np.ndarray, min_leaf: int
) -> tuple[float, int, float] | None:
    """Best squared-error split for regression targets, same tie rules as Gini."""
    n = len(rows)
    targets = g[rows]
    best: tuple[float, int, float] | None = None
    for f in features:
        x = X[rows, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = targets[order]
        boundaries = np.nonzero(xs[:-1] < xs[1:])[0]
        if boundaries.size == 0:
            continue
        s1 = np.cumsum(ys)
        s2 = np.cumsum(ys**2)
        n_left = boundaries + 1.0
        n_right = n - n_left
        keep = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not np.any(keep):
            continue
        left_s1 = s1[boundaries]
        left_s2 = s2[boundaries]
        sse_left = left_s2 - left_s1**2 / n_left
        sse_right = (s2[-1] - left_s2) - (s1[-1] - left_s1) ** 2 / n_right
        score = sse_left + sse_right
        score = np.where(keep, score, np.inf)
        idx = int(np.argmin(score))
        if not np.isfinite(score[idx]):
            continue
        if best is None or score[idx] < best[0]:
            best = (float(score[idx]), int(f), float(xs[boundaries[idx]]))
    return best


def _grow_tree(
    X: np.ndarray,
    target: np.ndarray,
    rows: np.ndarray,
    rng: np.random.Generator | None,
    mtry: int,
    min_leaf: int,
    max_depth: int,
    classification: bool,
) -> _Tree:
    """Depth-first CART growth with an explicit stack (no recursion limit).

    Nodes are expanded left-before-right so any per-node feature sampling
    consumes the generator in a fixed order.
    """
    d = X.shape[1]
    tree = _Tree()
    root = tree.add_node()
    stack = [(root, rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        node_target = target[node_rows]
        if classification:
            counts = np.bincount(node_target.astype(np.int64), minlength=N_CLASSES)
            tree.value[node] = float(np.argmax(counts))
            pure = np.count_nonzero(counts) <= 1
        else:
            tree.value[node] = float(node_target.mean())
            pure = bool(np.all(node_target == node_target[0]))
        if pure or len(node_rows) < 2 * min_leaf or (max_depth > 0 and depth >= max_depth):
            continue
        if rng is not None and mtry < d:
            features = np.sort(rng.permutation(d)[:mtry])
        else:
            features = np.arange(d)
        if classification:
            split = _best_split_gini(X, target, node_rows, features, min_leaf)
        else:
            split = _best_split_sse(X, target, node_rows, features, min_leaf)
        if split is None:
            continue
        _, feature, threshold = split
        goes_left = X[node_rows, feature] <= threshold
        left_id = tree.add_node()
        right_id = tree.add_node()
        tree.feature[node] = feature
        tree.threshold[node] = threshold
        tree.left[node] = left_id
        tree.right[node] = right_id
        stack.append((right_id, node_rows[~goes_left], depth + 1))
        stack.append((left_id, node_rows[goes_left], depth + 1))
    return tree


# --- Random forest -------------------------------------------------------------


def _fit_forest(X: np.ndarray, y: np.ndarray, seed: int, params: dict) -> dict:
    n, d = X.shape
    mtry = int(params["mtry"]) or max(1, int(math.isqrt(d)))
    mtry = min(mtry, d)
    trees = []
    for t in range(int(params["n_trees"])):
        rng = np.random.default_rng([seed, t])
        bootstrap = rng.integers(0, n, size=n)
        trees.append(
            _grow_tree(
                X,
                y,
                bootstrap,
                rng,
                mtry,
                int(params["min_leaf"]),
                int(params["max_depth"]),
                classification=True,
            )
        )
    return {"trees": trees}


def _forest_predict(state: dict, X: np.ndarray) -> np.ndarray:
    votes = np.zeros((len(X), N_CLASSES), dtype=np.int64)
    for tree in state["trees"]:
        pred = _tree_apply(tree, X).astype(np.int64)
        votes[np.arange(len(X)), pred] += 1
    return np.argmax(votes, axis=1).astype(np.int64)


# --- Gradient boosting ----------------------------------------------------------


def _fit_boost(X: np.ndarray, y: np.ndarray, seed: int, params: dict) -> dict:
    """One regression tree per class per round on softmax residuals.

    Scores start at the log class priors (so zero rounds predict the majority
    class) and each tree adds learning_rate times the mean residual of its leaf.
    Only classes present in the training set get score columns.
    """
    n = len(y)
    classes = np.unique(y)
    k = len(classes)
    priors = np.array([np.sum(y == c) for c in classes], dtype=float) / n
    base = np.log(priors)
    rounds = int(params["rounds"])
    lr = float(params["learning_rate"])
    depth = int(params["max_depth"])
    subsample = float(params["subsample"])

    trees: list[list[_Tree]] = []
    if k > 1 and rounds > 0:
        class_index = np.searchsorted(classes, y)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), class_index] = 1.0
        scores = np.tile(base, (n, 1))
        for r in range(rounds):
            rng = np.random.default_rng([seed, r])
            if subsample < 1.0:
                m = max(1, math.ceil(n * subsample))
                rows = np.sort(rng.choice(n, size=m, replace=False))
            else:
                rows = np.arange(n)
            shifted = scores - scores.max(axis=1, keepdims=True)
            probs = np.exp(shifted)
            probs /= probs.sum(axis=1, keepdims=True)
            residual = onehot - probs
            round_trees = []
            for ki in range(k):
                tree = _grow_tree(
                    X,
                    residual[:, ki],
                    rows,
                    None,
                    X.shape[1],
                    1,
                    depth,
                    classification=False,
                )
                scores[:, ki] += lr * _tree_apply(tree, X)
                round_trees.append(tree)
            trees.append(round_trees)
    return {"classes": classes, "base": base, "trees": trees, "learning_rate": lr}


def _boost_predict(state: dict, X: np.ndarray) -> np.ndarray:
    classes = state["classes"]
    scores = np.tile(state["base"], (len(X), 1))
    for round_trees in state["trees"]:
        for ki, tree in enumerate(round_trees):
            scores[:, ki] += state["learning_rate"] * _tree_apply(tree, X)
    return classes[np.argmax(scores, axis=1)].astype(np.int64)
