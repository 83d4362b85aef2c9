"""Next-bitrate classifiers: bagged CART forest, exhaustive k-NN and SVD-based LDA.

Class labels are kept sorted ascending; every argmax over votes takes the
first maximum, so ties resolve toward the lower bitrate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from edgeprefetch.engine import rng_stream
from edgeprefetch.forecast.features import FEATURE_NAMES, Dataset, FeatureVector

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "rf": {"n_estimators": 100, "max_depth": None, "min_samples_leaf": 2},
    "knn": {"n_neighbors": 5, "weights": "uniform"},
    "lda": {"solver": "svd", "shrinkage": None},
    "svm": {"C": 1.0, "kernel": "rbf"},
}
MODEL_KINDS = tuple(DEFAULT_PARAMS)


class TrainingError(ValueError):
    pass


# ---------------------------------------------------------------- trees

def _best_split(X: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Exhaustive Gini split search. Returns (feature, threshold) or None."""
    n = len(y)
    best = (np.inf, -1, 0.0)
    onehot = np.eye(n_classes, dtype=np.int64)
    pos = np.arange(1, n)  # size of the left child for cut after position pos-1
    valid_size = (pos >= min_leaf) & (n - pos >= min_leaf)
    if not valid_size.any():
        return None
    nl = pos[:, None].astype(float)
    nr = (n - pos)[:, None].astype(float)
    total = onehot[y].sum(axis=0)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(onehot[y[order]], axis=0)[:-1]
        ok = valid_size & (xs[:-1] < xs[1:])
        if not ok.any():
            continue
        right = total - left
        gini_l = 1.0 - ((left / nl) ** 2).sum(axis=1)
        gini_r = 1.0 - ((right / nr) ** 2).sum(axis=1)
        cost = (nl[:, 0] * gini_l + nr[:, 0] * gini_r) / n
        cost = np.where(ok, cost, np.inf)
        i = int(np.argmin(cost))
        if cost[i] < best[0]:
            lo, hi = xs[i], xs[i + 1]
            thr = (lo + hi) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (cost[i], f, thr)
    if best[1] < 0:
        return None
    return best[1], best[2]


@dataclass
class Tree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray

    @classmethod
    def grow(cls, X: np.ndarray, y: np.ndarray, n_classes: int,
             max_depth: int | None = None, min_samples_leaf: int = 1) -> "Tree":
        feature, threshold, left, right, leaf = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            leaf.append(0)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            counts = np.bincount(y[idx], minlength=n_classes)
            leaf[node] = int(np.argmax(counts))
            if (counts > 0).sum() <= 1 or (max_depth is not None and depth >= max_depth):
                continue
            split = _best_split(X[idx], y[idx], n_classes, min_samples_leaf)
            if split is None:
                continue
            f, thr = split
            go_left = X[idx, f] <= thr
            l, r = new_node(), new_node()
            feature[node], threshold[node], left[node], right[node] = f, thr, l, r
            stack.append((r, idx[~go_left], depth + 1))
            stack.append((l, idx[go_left], depth + 1))
        return cls(np.array(feature), np.array(threshold, dtype=float), np.array(left),
                   np.array(right), np.array(leaf))

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.leaf_class[node]
            go_left = X[rows[inner], f[inner]] <= self.threshold[node[inner]]
            node[inner] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])


class RandomForest:
    def __init__(self, n_estimators: int = 100, max_depth: int | None = None,
                 min_samples_leaf: int = 2, seed: int = 0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.trees: list[Tree] = []
        self.n_classes = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        rng = rng_stream(self.seed, "classifier-bootstrap")
        self.trees = []
        for _ in range(self.n_estimators):
            boot = rng.integers(0, len(y), len(y))
            self.trees.append(Tree.grow(X[boot], y[boot], self.n_classes,
                                        self.max_depth, self.min_samples_leaf))
        self._pack()
        return self

    def _pack(self) -> None:
        # flatten all trees so one vectorized walk covers the whole forest
        offsets = np.cumsum([0] + [len(t.feature) for t in self.trees[:-1]])
        self._roots = offsets.astype(np.int64)
        self._feature = np.concatenate([t.feature for t in self.trees])
        self._threshold = np.concatenate([t.threshold for t in self.trees])
        self._left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offsets)])
        self._right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offsets)])
        self._leaf = np.concatenate([t.leaf_class for t in self.trees])

    def tree_votes(self, X: np.ndarray) -> np.ndarray:
        """Class index chosen by every tree, shape (n_samples, n_trees)."""
        n = len(X)
        node = np.tile(self._roots, (n, 1))
        rows = np.repeat(np.arange(n)[:, None], len(self._roots), axis=1)
        while True:
            f = self._feature[node]
            inner = f >= 0
            if not inner.any():
                return self._leaf[node]
            ni = node[inner]
            go_left = X[rows[inner], f[inner]] <= self._threshold[ni]
            node[inner] = np.where(go_left, self._left[ni], self._right[ni])

    def predict(self, X: np.ndarray) -> np.ndarray:
        votes = self.tree_votes(X)
        counts = np.zeros((len(X), self.n_classes), dtype=np.int64)
        for c in range(self.n_classes):
            counts[:, c] = (votes == c).sum(axis=1)
        return np.argmax(counts, axis=1)

    def state(self) -> dict:
        return {"trees": [{"feature": t.feature.tolist(), "threshold": t.threshold.tolist(),
                           "left": t.left.tolist(), "right": t.right.tolist(),
                           "leaf_class": t.leaf_class.tolist()} for t in self.trees]}

    def load_state(self, state: dict) -> None:
        self.trees = [Tree(np.array(t["feature"], dtype=np.int64), np.array(t["threshold"], dtype=float),
                           np.array(t["left"], dtype=np.int64), np.array(t["right"], dtype=np.int64),
                           np.array(t["leaf_class"], dtype=np.int64)) for t in state["trees"]]
        self._pack()


# ---------------------------------------------------------------- k-NN

class KNearest:
    def __init__(self, n_neighbors: int = 5):
        self.k = n_neighbors
        self.X = np.empty((0, 0))
        self.y = np.empty(0, dtype=np.int64)
        self.n_classes = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "KNearest":
        if len(y) < self.k:
            raise TrainingError(f"k-NN needs at least {self.k} records, got {len(y)}")
        self.X, self.y = X.copy(), y.copy()
        return self

    def neighbors(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((len(X), self.k), dtype=np.int64)
        sq_train = (self.X ** 2).sum(axis=1)
        for start in range(0, len(X), 512):
            q = X[start:start + 512]
            d = (q ** 2).sum(axis=1)[:, None] - 2 * q @ self.X.T + sq_train[None, :]
            # ties at equal distance go to the earlier training row
            out[start:start + 512] = np.argsort(d, axis=1, kind="stable")[:, :self.k]
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        labels = self.y[self.neighbors(X)]
        counts = np.stack([(labels == c).sum(axis=1) for c in range(self.n_classes)], axis=1)
        return np.argmax(counts, axis=1)

    def state(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist()}

    def load_state(self, state: dict) -> None:
        self.X = np.array(state["X"], dtype=float).reshape(len(state["y"]), -1)
        self.y = np.array(state["y"], dtype=np.int64)


# ---------------------------------------------------------------- LDA

class LinearDiscriminant:
    def __init__(self, tol: float = 1e-8):
        self.tol = tol
        self.n_classes = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LinearDiscriminant":
        n, K = len(y), self.n_classes
        present = np.bincount(y, minlength=K)
        means = np.zeros((K, X.shape[1]))
        for c in range(K):
            if present[c]:
                means[c] = X[y == c].mean(axis=0)
        centered = (X - means[y]) / np.sqrt(max(n - (present > 0).sum(), 1))
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        keep = s > self.tol * s[0]
        # pseudo-inverse of the pooled within-class covariance
        whiten = vt[keep].T / s[keep]
        proj = means @ whiten
        self.coef = proj @ whiten.T
        with np.errstate(divide="ignore"):
            log_prior = np.log(present / n)
        self.intercept = -0.5 * (proj ** 2).sum(axis=1) + log_prior
        self.means = means
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef.T + self.intercept

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def state(self) -> dict:
        return {"coef": self.coef.tolist(), "intercept": self.intercept.tolist(), "means": self.means.tolist()}

    def load_state(self, state: dict) -> None:
        self.coef = np.array(state["coef"], dtype=float)
        self.intercept = np.array(state["intercept"], dtype=float)
        self.means = np.array(state["means"], dtype=float)


# ---------------------------------------------------------------- wrapper

@dataclass
class TrainedModel:
    kind: str
    params: dict
    labels: np.ndarray           # ascending bitrates, Mbps
    estimator: Any
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    feature_names: list[str] = field(default_factory=lambda: list(FEATURE_NAMES))
    meta: dict = field(default_factory=dict)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.mean is None:
            return X
        return (X - self.mean) / self.scale

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.labels[self.estimator.predict(self.transform(X))]

    def predict_one(self, fv: FeatureVector) -> float:
        return float(self.predict(fv.as_array()[None, :])[0])


def standardizer(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def make_estimator(kind: str, params: dict, seed: int = 0):
    if kind == "rf":
        return RandomForest(params["n_estimators"], params["max_depth"], params["min_samples_leaf"], seed)
    if kind == "knn":
        if params.get("weights", "uniform") not in ("uniform", None):
            raise TrainingError("k-NN supports uniform weights only")
        return KNearest(params["n_neighbors"])
    if kind == "lda":
        if params.get("solver", "svd") != "svd" or params.get("shrinkage") is not None:
            raise TrainingError("LDA supports the svd solver without shrinkage only")
        return LinearDiscriminant()
    if kind == "svm":
        raise NotImplementedError("svm: RBF-SVM training is not implemented (registered model kind only)")
    raise TrainingError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")


def train(dataset: Dataset, kind: str = "rf", params: dict | None = None, seed: int = 0) -> TrainedModel:
    kind = kind.lower()
    if kind not in DEFAULT_PARAMS:
        raise TrainingError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    merged = {**DEFAULT_PARAMS[kind], **(params or {})}
    if len(dataset) == 0:
        raise TrainingError("cannot train on an empty dataset")
    labels = np.unique(dataset.y)
    if len(labels) < 2:
        raise TrainingError("training needs at least two distinct labels")
    est = make_estimator(kind, merged, seed)
    est.n_classes = len(labels)
    y = np.searchsorted(labels, dataset.y)
    mean = scale = None
    X = dataset.X
    if kind in ("knn", "lda"):
        mean, scale = standardizer(X)
        X = (X - mean) / scale
    est.fit(X, y)
    return TrainedModel(kind, merged, labels, est, mean, scale, meta={"seed": seed, "n_train": len(dataset)})
