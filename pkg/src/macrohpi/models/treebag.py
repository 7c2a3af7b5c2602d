"""Bagged CART regression trees.

Each tree is grown on a bootstrap sample by greedy variance reduction over all
features, with thresholds at midpoints between consecutive distinct values. A
node is not split when it holds fewer than ``2 * min_node`` rows or has zero
variance, and every split leaves at least ``min_node`` rows on each side. No
pruning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..dataset import CountryDataset
from ..errors import DataError

DEFAULT_N_BAGS = 25
DEFAULT_MIN_NODE = 5


@dataclass(frozen=True)
class RegressionTree:
    """Flat array representation; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray
    gain: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            r = rows[active]
            n = node[active]
            go_left = X[r, feat[active]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "n_node", "gain")}

    @classmethod
    def from_dict(cls, d: dict) -> RegressionTree:
        ints = {"feature", "left", "right", "n_node"}
        return cls(**{k: np.asarray(d[k], dtype=np.intp if k in ints else float) for k in
                      ("feature", "threshold", "left", "right", "value", "n_node", "gain")})


def _best_split(Xn: np.ndarray, yn: np.ndarray, min_node: int):
    """Return ``(feature, threshold, gain)`` of the best split, or None.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    m, d = Xn.shape
    yc = yn - yn.mean()
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    full = np.cumsum(yc[order], axis=0)
    tot = full[-1]
    cs = full[:-1]
    nl = np.arange(1, m, dtype=float)[:, None]
    nr = m - nl
    # SSE reduction; with centered targets this is cs^2 m / (nl nr) up to rounding
    gain = cs ** 2 / nl + (tot - cs) ** 2 / nr - tot ** 2 / m
    valid = xs[1:] > xs[:-1]
    lo = min_node - 1
    hi = m - min_node
    valid[:lo] = False
    valid[hi:] = False
    gain = np.where(valid, gain, -np.inf).T
    flat = int(np.argmax(gain))
    j, i = divmod(flat, m - 1)
    best = gain[j, i]
    if not np.isfinite(best) or best <= 0.0:
        return None
    threshold = 0.5 * (xs[i, j] + xs[i + 1, j])
    # guard against a midpoint that rounds onto the upper value
    if not threshold < xs[i + 1, j]:
        threshold = xs[i, j]
    return j, float(threshold), float(best)


def grow_tree(X: np.ndarray, y: np.ndarray, min_node: int = DEFAULT_MIN_NODE) -> RegressionTree:
    feature, threshold, left, right, value, n_node, gain = [], [], [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()))
        n_node.append(len(rows))
        gain.append(0.0)
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        if len(rows) < 2 * min_node:
            continue
        yn = y[rows]
        if np.all(yn == yn[0]):
            continue
        split = _best_split(X[rows], yn, min_node)
        if split is None:
            continue
        j, thr, g = split
        mask = X[rows, j] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        feature[node], threshold[node], gain[node] = j, thr, g
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], rrows))
        stack.append((left[node], lrows))
    return RegressionTree(
        np.array(feature, dtype=np.intp), np.array(threshold), np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp), np.array(value), np.array(n_node, dtype=np.intp),
        np.array(gain),
    )


@dataclass(frozen=True)
class TreeBagModel:
    trees: tuple[RegressionTree, ...]
    n_bags: int
    min_node: int
    seed: int
    n_features: int
    feature_names: tuple[str, ...] = ()
    oob_rmse: float = float("nan")
    oob_prediction: np.ndarray | None = field(default=None, repr=False, compare=False)

    kind = "treebag"

    @property
    def d(self) -> int:
        return self.n_features

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        out = total / len(self.trees)
        return float(out[0]) if single else out

    def importance_raw(self) -> np.ndarray:
        """Total SSE reduction credited to each feature over all trees."""
        raw = np.zeros(self.n_features)
        for tree in self.trees:
            inner = tree.feature >= 0
            np.add.at(raw, tree.feature[inner], tree.gain[inner])
        return raw


def fit_treebag(X, y, n_bags: int = DEFAULT_N_BAGS, min_node: int = DEFAULT_MIN_NODE,
                seed: int = 0, feature_names: Sequence[str] = ()) -> TreeBagModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n_bags < 1:
        raise ValueError("n_bags must be >= 1")
    if min_node < 2:
        raise ValueError("min_node must be >= 2")
    if n < 2 * min_node:
        raise DataError(f"panel too short for tree growth ({n} rows, need {2 * min_node})")
    rng = np.random.default_rng(seed)
    trees = []
    oob_sum = np.zeros(n)
    oob_cnt = np.zeros(n)
    for _ in range(n_bags):
        idx = rng.integers(0, n, size=n)
        tree = grow_tree(X[idx], y[idx], min_node)
        trees.append(tree)
        out = np.ones(n, dtype=bool)
        out[idx] = False
        if out.any():
            oob_sum[out] += tree.predict(X[out])
            oob_cnt[out] += 1
    seen = oob_cnt > 0
    oob_pred = np.full(n, np.nan)
    oob_pred[seen] = oob_sum[seen] / oob_cnt[seen]
    oob_rmse = float(np.sqrt(np.mean((oob_pred[seen] - y[seen]) ** 2))) if seen.any() else float("nan")
    return TreeBagModel(tuple(trees), n_bags, min_node, int(seed), X.shape[1],
                        tuple(feature_names), oob_rmse, oob_pred)


def train_treebag(data: CountryDataset, n_bags: int = DEFAULT_N_BAGS,
                  min_node: int = DEFAULT_MIN_NODE, seed: int = 0) -> TreeBagModel:
    return fit_treebag(data.X, data.y, n_bags, min_node, seed, data.feature_names)
