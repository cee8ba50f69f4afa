"""Least-squares gradient boosted regression trees with exact splits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GAIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Tree:
    """Array-backed binary tree. Leaves have feature == -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _best_split(Xn: np.ndarray, r: np.ndarray, min_leaf: int):
    """Exact best split of one node. Returns (gain, feature, threshold) or None.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    n, d = Xn.shape
    if n < 2 * min_leaf:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    cs = np.cumsum(r[order], axis=0)[:-1]  # left sums for split after row i
    total = r.sum()
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    gain = cs**2 / nl + (total - cs) ** 2 / nr - total**2 / n
    valid = xs[1:] > xs[:-1]
    valid[: min_leaf - 1] = False
    if min_leaf > 1:
        valid[n - min_leaf:] = False
    gain = np.where(valid, gain, -np.inf)
    flat = gain.T.ravel()  # feature-major, thresholds ascending within a feature
    best = int(np.argmax(flat))
    g = flat[best]
    if not np.isfinite(g) or g <= _GAIN_TOL * max(1.0, float(r @ r)):
        return None
    f, i = divmod(best, n - 1)
    return float(g), f, 0.5 * (xs[i, f] + xs[i + 1, f])


def fit_tree(X: np.ndarray, r: np.ndarray, max_depth: int, min_leaf: int, gains: np.ndarray) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    stack = [(new_node(), np.arange(len(X)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        value[node] = float(r[idx].mean())
        if depth >= max_depth:
            continue
        split = _best_split(X[idx], r[idx], min_leaf)
        if split is None:
            continue
        g, f, t = split
        gains[f] += g
        mask = X[idx, f] <= t
        feature[node], threshold[node] = f, t
        left[node], right[node] = new_node(), new_node()
        stack.append((right[node], idx[~mask], depth + 1))
        stack.append((left[node], idx[mask], depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value))


class GBTRegressor:
    """Single-output boosted trees: F_0 = mean(y), F_m = F_{m-1} + lr * tree_m."""

    def __init__(self, n_trees=100, max_depth=6, learning_rate=0.1, min_samples_leaf=5):
        if learning_rate <= 0 or max_depth < 1 or n_trees < 1 or min_samples_leaf < 1:
            raise ValueError("invalid gbt parameters")
        self.n_trees = int(n_trees)
        self.max_depth = int(max_depth)
        self.learning_rate = float(learning_rate)
        self.min_samples_leaf = int(min_samples_leaf)
        self.init_ = 0.0
        self.trees_: list[Tree] = []
        self.importance_gain_ = None
        self.train_mse_ = None

    def fit(self, X, y) -> "GBTRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        # a constant target is reproduced exactly (the float mean may drift by an ulp)
        self.init_ = float(y[0]) if np.all(y == y[0]) else float(y.mean())
        f = np.full(len(y), self.init_)
        gains = np.zeros(X.shape[1])
        mse = [float(np.mean((y - f) ** 2))]
        self.trees_ = []
        for _ in range(self.n_trees):
            r = y - f
            tree = fit_tree(X, r, self.max_depth, self.min_samples_leaf, gains)
            self.trees_.append(tree)
            f = f + self.learning_rate * tree.predict(X)
            mse.append(float(np.mean((y - f) ** 2)))
            if len(tree.feature) == 1 and abs(tree.value[0]) < 1e-15:
                break  # nothing left to fit
        self.importance_gain_ = gains
        self.train_mse_ = np.array(mse)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(len(X), self.init_)
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(X)
        return out

    def state(self) -> dict:
        """Flat arrays: trees concatenated with per-tree node offsets."""
        sizes = np.array([len(t.feature) for t in self.trees_], dtype=np.int64)
        cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees_]) if self.trees_ else np.zeros(0)
        return {
            "params": np.array([self.n_trees, self.max_depth, self.learning_rate, self.min_samples_leaf, self.init_]),
            "sizes": sizes,
            "feature": cat("feature").astype(np.int64),
            "threshold": cat("threshold"),
            "left": cat("left").astype(np.int64),
            "right": cat("right").astype(np.int64),
            "value": cat("value"),
            "gains": self.importance_gain_,
            "train_mse": self.train_mse_,
        }

    @classmethod
    def from_state(cls, s: dict) -> "GBTRegressor":
        p = s["params"]
        m = cls(int(p[0]), int(p[1]), float(p[2]), int(p[3]))
        m.init_ = float(p[4])
        bounds = np.concatenate([[0], np.cumsum(s["sizes"])])
        ints = np.int64
        m.trees_ = [
            Tree(np.asarray(s["feature"][a:b], dtype=ints), np.asarray(s["threshold"][a:b], dtype=float),
                 np.asarray(s["left"][a:b], dtype=ints), np.asarray(s["right"][a:b], dtype=ints),
                 np.asarray(s["value"][a:b], dtype=float))
            for a, b in zip(bounds[:-1], bounds[1:])
        ]
        m.importance_gain_ = np.asarray(s["gains"], dtype=float)
        m.train_mse_ = np.asarray(s["train_mse"], dtype=float)
        return m
