"""Self-describing JSON container for trained models."""

from __future__ import annotations

import json

import numpy as np

from ..dataset import ModelSpec
from .knn import KnnModel, Scaler
from .learners import MeanModel
from .treebag import RegressionTree, TreeBagModel

FORMAT_VERSION = 1


def model_to_dict(model, spec: ModelSpec | None = None, country: str = "") -> dict:
    base = {"format": "macrohpi-model", "version": FORMAT_VERSION, "country": country,
            "spec": spec.to_dict() if spec else None}
    if isinstance(model, KnnModel):
        base.update(
            kind="knn", k=model.k, seed=model.seed, feature_names=list(model.feature_names),
            scaler={"mean": model.scaler.mean.tolist(), "std": model.scaler.std.tolist()},
            train_X_standardized=model.train_X_standardized.tolist(),
            train_y=model.train_y.tolist(),
            cv_table={str(k): v for k, v in model.cv_table.items()},
        )
    elif isinstance(model, TreeBagModel):
        base.update(
            kind="treebag", n_bags=model.n_bags, min_node=model.min_node, seed=model.seed,
            n_features=model.n_features, feature_names=list(model.feature_names),
            oob_rmse=model.oob_rmse, trees=[t.to_dict() for t in model.trees],
        )
    elif isinstance(model, MeanModel):
        base.update(kind="mean", mean=model.mean, feature_names=list(model.feature_names))
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return base


def model_from_dict(d: dict):
    if d.get("format") != "macrohpi-model":
        raise ValueError("not a macrohpi model container")
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')}")
    kind = d["kind"]
    names = tuple(d.get("feature_names", ()))
    if kind == "knn":
        scaler = Scaler(np.asarray(d["scaler"]["mean"], dtype=float),
                        np.asarray(d["scaler"]["std"], dtype=float))
        return KnnModel(int(d["k"]), np.asarray(d["train_X_standardized"], dtype=float),
                        np.asarray(d["train_y"], dtype=float), scaler, int(d["seed"]), names,
                        {int(k): float(v) for k, v in d.get("cv_table", {}).items()})
    if kind == "treebag":
        trees = tuple(RegressionTree.from_dict(t) for t in d["trees"])
        return TreeBagModel(trees, int(d["n_bags"]), int(d["min_node"]), int(d["seed"]),
                            int(d["n_features"]), names, float(d.get("oob_rmse", "nan")))
    if kind == "mean":
        return MeanModel(float(d["mean"]), names)
    raise ValueError(f"unknown model kind {kind!r}")


def dumps(model, spec: ModelSpec | None = None, country: str = "") -> str:
    return json.dumps(model_to_dict(model, spec, country), sort_keys=True)


def loads(text: str):
    return model_from_dict(json.loads(text))


def load_spec(text: str) -> ModelSpec | None:
    d = json.loads(text)
    return ModelSpec.from_dict(d["spec"]) if d.get("spec") else None
