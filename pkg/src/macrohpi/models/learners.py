"""Learner objects: a configured algorithm that can be fitted under a seed.

Everything that trains models repeatedly (ensembles, diagnostics, benchmarks)
takes one of these, so the algorithm choice and its hyperparameters travel
together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ..dataset import CountryDataset
from .knn import DEFAULT_K_GRID, KnnModel, train_knn
from .treebag import DEFAULT_MIN_NODE, DEFAULT_N_BAGS, TreeBagModel, train_treebag
from .validation import CvConfig


class Model(Protocol):
    feature_names: tuple[str, ...]

    def predict(self, X) -> np.ndarray: ...


class Learner(Protocol):
    name: str

    def fit(self, data: CountryDataset, seed: int) -> Model: ...


@dataclass(frozen=True)
class KnnLearner:
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    folds: int = 10
    repeats: int = 3
    name: str = "knn"

    def fit(self, data: CountryDataset, seed: int) -> KnnModel:
        return train_knn(data, CvConfig(self.folds, self.repeats, seed), self.k_grid)


@dataclass(frozen=True)
class TreeBagLearner:
    n_bags: int = DEFAULT_N_BAGS
    min_node: int = DEFAULT_MIN_NODE
    name: str = "treebag"

    def fit(self, data: CountryDataset, seed: int) -> TreeBagModel:
        return train_treebag(data, self.n_bags, self.min_node, seed)


@dataclass(frozen=True)
class MeanModel:
    """Predicts the training mean everywhere."""

    mean: float
    feature_names: tuple[str, ...] = ()

    kind = "mean"

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.mean
        return np.full(len(X), self.mean)


@dataclass(frozen=True)
class MeanLearner:
    name: str = "mean"

    def fit(self, data: CountryDataset, seed: int) -> MeanModel:
        return MeanModel(float(np.mean(data.y)), data.feature_names)


LEARNERS = {"knn": KnnLearner, "treebag": TreeBagLearner, "mean": MeanLearner}


def get_learner(learner: str | Learner, **options) -> Learner:
    if not isinstance(learner, str):
        return learner
    key = learner.strip().lower().replace("-", "").replace("_", "")
    key = {"tbag": "treebag", "bag": "treebag", "treebagging": "treebag"}.get(key, key)
    if key not in LEARNERS:
        raise KeyError(f"unknown learner {learner!r}; valid: {', '.join(LEARNERS)}")
    return LEARNERS[key](**options)


def cv_score(model: Model) -> float:
    """The model's own out-of-sample error estimate, if it carries one."""
    if isinstance(model, KnnModel):
        return model.cv_rmse
    if isinstance(model, TreeBagModel):
        return model.oob_rmse
    return float("nan")


def k_grid_arg(text: str | Sequence[int]) -> tuple[int, ...]:
    if isinstance(text, str):
        return tuple(int(t) for t in text.split(",") if t.strip())
    return tuple(int(t) for t in text)
