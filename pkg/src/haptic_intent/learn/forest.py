"""CART classification trees with Gini splits and bagged random forests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Tree:
    """Array-encoded binary tree; leaves have ``feature == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray  # class index, meaningful at leaves

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_index(self, X) -> np.ndarray:
        return self.leaf_class[self.apply(X)]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "leaf_class")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=int), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=int), np.array(d["right"], dtype=int),
                   np.array(d["leaf_class"], dtype=int))


def _gini_split(x, yk, K, min_leaf):
    """Best threshold on one feature: (weighted child impurity, threshold) or None."""
    if x.size < 2:
        return None
    o = np.argsort(x, kind="stable")
    xs = x[o]
    onehot = np.zeros((x.size, K))
    onehot[np.arange(x.size), yk[o]] = 1.0
    cl = np.cumsum(onehot, axis=0)[:-1]
    n = x.size
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    cr = cl[-1] + onehot[-1] - cl
    valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    gl = 1.0 - ((cl / nl[:, None]) ** 2).sum(1)
    gr = 1.0 - ((cr / nr[:, None]) ** 2).sum(1)
    imp = np.where(valid, (nl * gl + nr * gr) / n, np.inf)
    j = int(np.argmin(imp))
    return imp[j], 0.5 * (xs[j] + xs[j + 1])


def fit_tree(X, yk, n_classes: int, max_features=None, min_leaf: int = 1, max_depth=None, rng=None) -> Tree:
    """Grow a CART tree on class indices ``yk`` until leaves are pure or too small.

    ``max_features`` features are drawn without replacement at each node
    (``None`` uses all). Majority ties in leaves go to the lowest class index;
    split ties to the lowest feature index.
    """
    X = np.asarray(X, dtype=float)
    yk = np.asarray(yk, dtype=int)
    p = X.shape[1]
    m = p if max_features is None else max(1, min(int(max_features), p))
    feature, threshold, left, right, leaf = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(yk[idx], minlength=n_classes)
        leaf[node] = int(np.argmax(counts))
        if counts.max() == idx.size or idx.size < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue
        parent = 1.0 - ((counts / idx.size) ** 2).sum()
        feats = np.arange(p) if m == p else np.sort(rng.choice(p, size=m, replace=False))
        best = None
        for f in feats:
            r = _gini_split(X[idx, f], yk[idx], n_classes, min_leaf)
            if r is not None and (best is None or r[0] < best[0] - 1e-12):
                best = (r[0], int(f), r[1])
        if best is None or best[0] >= parent - 1e-12:
            continue
        _, f, thr = best
        go_left = X[idx, f] <= thr
        ln, rn = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, float(thr), ln, rn
        stack.append((rn, idx[~go_left], depth + 1))
        stack.append((ln, idx[go_left], depth + 1))
    return Tree(np.array(feature, dtype=int), np.array(threshold, dtype=float), np.array(left, dtype=int),
                np.array(right, dtype=int), np.array(leaf, dtype=int))


@dataclass
class RandomForest:
    classes: np.ndarray
    trees: list
    oob_error: float | None = None

    def votes(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        v = np.zeros((X.shape[0], len(self.classes)), dtype=int)
        rows = np.arange(X.shape[0])
        for t in self.trees:
            np.add.at(v, (rows, t.predict_index(X)), 1)
        return v

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.votes(X), axis=1)]

    def to_dict(self) -> dict:
        return {"classes": self.classes.tolist(), "trees": [t.to_dict() for t in self.trees],
                "oob_error": self.oob_error}

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        return cls(np.array(d["classes"], dtype=int), [Tree.from_dict(t) for t in d["trees"]], d["oob_error"])


def train_cart(X, y, min_leaf: int = 1, max_depth=None) -> RandomForest:
    """A single unpruned tree on all samples and all features, wrapped as a forest."""
    return train_random_forest(X, y, n_trees=1, bootstrap=None, max_features=None, min_leaf=min_leaf,
                               max_depth=max_depth)


def train_random_forest(
    X,
    y,
    n_trees: int = 100,
    bootstrap: float | None = 1.0,
    max_features="sqrt",
    min_leaf: int = 5,
    max_depth=None,
    seed: int = 0,
) -> RandomForest:
    """Bagged CART ensemble; ``bootstrap`` is the resample fraction (``None`` disables bagging)."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    classes = np.unique(y)
    yk = np.searchsorted(classes, y)
    n, p = X.shape
    if max_features == "sqrt":
        max_features = max(1, int(np.sqrt(p)))
    rng = np.random.default_rng(seed)
    trees = []
    oob_votes = np.zeros((n, classes.size), dtype=int)
    for _ in range(n_trees):
        if bootstrap is None:
            idx = np.arange(n)
        else:
            idx = rng.integers(0, n, size=max(1, int(round(bootstrap * n))))
        tree = fit_tree(X[idx], yk[idx], classes.size, max_features, min_leaf, max_depth, rng)
        trees.append(tree)
        if bootstrap is not None:
            out = np.ones(n, dtype=bool)
            out[idx] = False
            if out.any():
                rows = np.flatnonzero(out)
                np.add.at(oob_votes, (rows, tree.predict_index(X[rows])), 1)
    oob_error = None
    seen = oob_votes.sum(1) > 0
    if bootstrap is not None and seen.any():
        oob_error = float(np.mean(np.argmax(oob_votes[seen], axis=1) != yk[seen]))
    return RandomForest(classes, trees, oob_error)
