"""k-nearest-neighbour regression on z-scored features.

Neighbours are found by Euclidean distance after standardizing every feature
with the training mean and standard deviation; equal distances go to the lower
training-row index. The prediction is the unweighted mean of the neighbours'
targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..dataset import CountryDataset
from ..errors import DataError
from .validation import CvConfig, min_train_size, repeated_kfold

DEFAULT_K_GRID = (3, 5, 7, 9, 11)


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, feature_names: Sequence[str] | None = None) -> Scaler:
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        bad = np.flatnonzero(std == 0)
        if bad.size:
            names = feature_names or [f"x{j + 1}" for j in range(X.shape[1])]
            raise DataError(f"constant feature column: {names[bad[0]]}")
        return cls(mean, std)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


def neighbour_indices(train: np.ndarray, query: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest training rows for each query row.

    Stable sort on squared distance, so ties resolve to the lower row index.
    """
    d2 = ((query[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


@dataclass(frozen=True)
class KnnModel:
    k: int
    train_X_standardized: np.ndarray
    train_y: np.ndarray
    scaler: Scaler
    seed: int = 0
    feature_names: tuple[str, ...] = ()
    cv_table: dict[int, float] = field(default_factory=dict)

    kind = "knn"

    def __post_init__(self):
        if not 1 <= self.k <= len(self.train_y):
            raise ValueError(f"k={self.k} must be in 1..{len(self.train_y)}")

    @property
    def d(self) -> int:
        return self.train_X_standardized.shape[1]

    @property
    def cv_rmse(self) -> float:
        return self.cv_table.get(self.k, float("nan"))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature values")
        Z = self.scaler.transform(X)
        out = np.empty(len(Z))
        # chunk to bound the n_query x n_train distance matrix
        step = max(1, 2_000_000 // max(1, len(self.train_y) * self.d))
        for start in range(0, len(Z), step):
            idx = neighbour_indices(self.train_X_standardized, Z[start:start + step], self.k)
            out[start:start + step] = self.train_y[idx].mean(axis=1)
        return float(out[0]) if single else out


def fit_knn(X, y, k: int, seed: int = 0, feature_names: Sequence[str] = (),
            cv_table: dict[int, float] | None = None) -> KnnModel:
    X = np.asarray(X, dtype=float)
    scaler = Scaler.fit(X, feature_names or None)
    return KnnModel(k, scaler.transform(X), np.asarray(y, dtype=float).copy(), scaler, seed,
                    tuple(feature_names), dict(cv_table or {}))


def cv_rmse_table(X, y, cv: CvConfig, k_grid: Sequence[int],
                  feature_names: Sequence[str] | None = None) -> dict[int, float]:
    """Mean fold RMSE for every ``k`` over all folds and repeats.

    Each fold is standardized with its own training rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    ks = sorted(set(int(k) for k in k_grid))
    kmax = ks[-1]
    errs: dict[int, list[float]] = {k: [] for k in ks}
    for _, tr, te in repeated_kfold(len(y), cv):
        scaler = Scaler.fit(X[tr], feature_names)
        idx = neighbour_indices(scaler.transform(X[tr]), scaler.transform(X[te]), kmax)
        ny = y[tr][idx]
        csum = np.cumsum(ny, axis=1)
        for k in ks:
            pred = csum[:, k - 1] / k
            errs[k].append(float(np.sqrt(np.mean((pred - y[te]) ** 2))))
    return {k: float(np.mean(v)) for k, v in errs.items()}


def train_knn(data: CountryDataset, cv: CvConfig | None = None,
              k_grid: Sequence[int] = DEFAULT_K_GRID) -> KnnModel:
    """Select ``k`` by repeated CV (ties -> smaller k), then fit on all rows."""
    cv = cv or CvConfig()
    if not k_grid:
        raise ValueError("k_grid is empty")
    limit = min_train_size(data.n, cv.folds)
    too_big = [k for k in k_grid if k > limit or k < 1]
    if too_big:
        raise ValueError(f"k values {too_big} exceed the smallest training fold ({limit} rows)")
    # fail early, with the feature name, on constant columns
    Scaler.fit(data.X, data.feature_names)
    table = cv_rmse_table(data.X, data.y, cv, k_grid, data.feature_names)
    best = min(table, key=lambda k: (table[k], k))
    return fit_knn(data.X, data.y, best, cv.seed, data.feature_names, table)
