"""Repeated k-fold cross-validation splits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class CvConfig:
    folds: int = 10
    repeats: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def with_seed(self, seed: int) -> CvConfig:
        return CvConfig(self.folds, self.repeats, seed)


def repeated_kfold(n: int, cv: CvConfig) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(repeat, train_idx, test_idx)``; each repeat reshuffles rows."""
    if n < cv.folds:
        raise ValueError(f"cannot split {n} rows into {cv.folds} folds")
    rng = np.random.default_rng(cv.seed)
    for rep in range(cv.repeats):
        order = rng.permutation(n)
        for test in np.array_split(order, cv.folds):
            mask = np.ones(n, dtype=bool)
            mask[test] = False
            yield rep, np.flatnonzero(mask), np.sort(test)


def min_train_size(n: int, folds: int) -> int:
    return n - int(np.ceil(n / folds))
