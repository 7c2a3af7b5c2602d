"""Variable importance scaled to 0..100."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..dataset import CountryDataset
from .knn import KnnModel
from .treebag import TreeBagModel


class ImportanceMethod(str, Enum):
    FILTER = "FILTER"
    TREE_SSE = "TREE_SSE"


@dataclass(frozen=True)
class ImportanceReport:
    feature_names: tuple[str, ...]
    scores: np.ndarray
    raw: np.ndarray
    method: ImportanceMethod

    def ranking(self) -> list[str]:
        order = sorted(range(len(self.scores)), key=lambda j: (-self.scores[j], j))
        return [self.feature_names[j] for j in order]

    def to_csv(self) -> str:
        lines = ["feature,importance,raw,method"]
        for j in np.argsort(-self.scores, kind="stable"):
            lines.append(f"{self.feature_names[j]},{self.scores[j]!r},{self.raw[j]!r},{self.method.value}")
        return "\n".join(lines) + "\n"


def filter_raw(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared Pearson correlation of each column with the target."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    denom = np.sqrt((xc ** 2).sum(axis=0) * (yc @ yc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0, (xc.T @ yc) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(r, -1.0, 1.0) ** 2


def scale_max(raw: np.ndarray) -> np.ndarray:
    top = raw.max() if raw.size else 0.0
    return raw / top * 100.0 if top > 0 else np.zeros_like(raw)


def scale_minmax(raw: np.ndarray) -> np.ndarray:
    lo, hi = raw.min(), raw.max()
    if hi > lo:
        return (raw - lo) / (hi - lo) * 100.0
    return np.full_like(raw, 100.0 if hi > 0 else 0.0)


def variable_importance(obj) -> ImportanceReport:
    """TREE_SSE for a bagged forest, FILTER for a dataset or a kNN model."""
    if isinstance(obj, TreeBagModel):
        raw = obj.importance_raw()
        return ImportanceReport(_names(obj.feature_names, raw.size), scale_minmax(raw), raw,
                                ImportanceMethod.TREE_SSE)
    if isinstance(obj, CountryDataset):
        X, y, names = obj.X, obj.y, obj.feature_names
    elif isinstance(obj, KnnModel):
        X, y, names = obj.train_X_standardized, obj.train_y, obj.feature_names
    else:
        raise TypeError(f"no importance method for {type(obj).__name__}")
    raw = filter_raw(X, y)
    return ImportanceReport(_names(names, raw.size), scale_max(raw), raw, ImportanceMethod.FILTER)


def _names(names, d) -> tuple[str, ...]:
    return tuple(names) if names else tuple(f"x{j + 1}" for j in range(d))
