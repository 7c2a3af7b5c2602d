"""Learners, cross-validation, importance and ensembles."""

from .ensemble import EnsembleResult, RunRecord, ensemble_fit
from .importance import ImportanceMethod, ImportanceReport, variable_importance
from .knn import KnnModel, Scaler, fit_knn, train_knn
from .learners import KnnLearner, MeanLearner, MeanModel, TreeBagLearner, get_learner
from .treebag import RegressionTree, TreeBagModel, fit_treebag, grow_tree, train_treebag
from .validation import CvConfig, repeated_kfold

__all__ = [
    "CvConfig", "EnsembleResult", "ImportanceMethod", "ImportanceReport", "KnnLearner",
    "KnnModel", "MeanLearner", "MeanModel", "RegressionTree", "RunRecord", "Scaler",
    "TreeBagLearner", "TreeBagModel", "ensemble_fit", "fit_knn", "fit_treebag", "get_learner",
    "grow_tree", "repeated_kfold", "train_knn", "train_treebag", "variable_importance",
]
