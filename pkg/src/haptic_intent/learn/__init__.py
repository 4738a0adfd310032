"""Dimensionality reduction, classifiers and model selection."""

from .boost import AdaBoostM2, Stump, best_stump, train_adaboost
from .forest import RandomForest, Tree, fit_tree, train_cart, train_random_forest
from .mlp import Mlp, MlpShape, lbfgs, loss_and_grad, softmax, train_mlp
from .model import (
    DEFAULT_PARAMS,
    VARIANTS,
    FingerprintError,
    ModelConfig,
    TrainedModel,
    train_model,
    train_on_corpus,
)
from .reducers import Reducer, Standardizer, fit_lda, fit_pca, fit_reducer
from .selection import CvResult, SearchResult, cross_validate, hyperparameter_search, trial_folds
from .svm import ConvergenceError, SvmEcoc, default_gamma, hinge_decode, rbf_kernel, train_svm_ecoc

__all__ = [
    "AdaBoostM2", "Stump", "best_stump", "train_adaboost",
    "RandomForest", "Tree", "fit_tree", "train_cart", "train_random_forest",
    "Mlp", "MlpShape", "lbfgs", "loss_and_grad", "softmax", "train_mlp",
    "DEFAULT_PARAMS", "VARIANTS", "FingerprintError", "ModelConfig", "TrainedModel", "train_model",
    "train_on_corpus",
    "Reducer", "Standardizer", "fit_lda", "fit_pca", "fit_reducer",
    "CvResult", "SearchResult", "cross_validate", "hyperparameter_search", "trial_folds",
    "ConvergenceError", "SvmEcoc", "default_gamma", "hinge_decode", "rbf_kernel", "train_svm_ecoc",
]
