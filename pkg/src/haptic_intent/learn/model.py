"""Uniform train/predict contract over the four classifier variants."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .boost import AdaBoostM2, train_adaboost
from .forest import RandomForest, train_random_forest
from .mlp import Mlp, train_mlp
from .reducers import Reducer, Standardizer, fit_reducer
from .svm import SvmEcoc, train_svm_ecoc

VARIANTS = ("svm_ecoc", "adaboost", "random_forest", "mlp")
REDUCERS = ("none", "pca", "lda")

DEFAULT_PARAMS = {
    "svm_ecoc": {"gamma": None, "C": 1.0},
    "adaboost": {"rounds": 100},
    "random_forest": {"n_trees": 100, "bootstrap": 1.0, "max_features": "sqrt", "min_leaf": 5},
    "mlp": {"alpha1": 1.0, "alpha2": 1.0, "l2": 0.0, "max_iter": 1000},
}

_CLASSIFIERS = {"svm_ecoc": SvmEcoc, "adaboost": AdaBoostM2, "random_forest": RandomForest, "mlp": Mlp}


class FingerprintError(ValueError):
    """Features were produced with a different channel layout or window spec."""


@dataclass
class ModelConfig:
    variant: str = "adaboost"
    params: dict = field(default_factory=dict)
    reducer: str = "lda"
    n_components: int | None = None  # None: C-1 for lda, 4 for pca
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.reducer not in REDUCERS:
            raise ValueError(f"unknown reducer {self.reducer!r}; expected one of {REDUCERS}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.variant])
        if unknown:
            raise ValueError(f"unknown parameters for {self.variant}: {sorted(unknown)}")

    @property
    def resolved_params(self) -> dict:
        return {**DEFAULT_PARAMS[self.variant], **self.params}

    def with_updates(self, **updates) -> "ModelConfig":
        fields = {k: updates.pop(k) for k in ("reducer", "n_components", "standardize", "seed") if k in updates}
        return ModelConfig(self.variant, {**self.params, **updates}, **{**self._fields(), **fields})

    def _fields(self) -> dict:
        return {"reducer": self.reducer, "n_components": self.n_components, "standardize": self.standardize,
                "seed": self.seed}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class TrainedModel:
    config: ModelConfig
    labels: list
    fingerprint: str
    n_features: int
    standardizer: Standardizer | None
    reducer: Reducer
    classifier: object

    @property
    def variant(self) -> str:
        return self.config.variant

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise FingerprintError(f"expected {self.n_features} features, got {X.shape[1]}")
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return self.reducer.reduce(X)

    def check_fingerprint(self, fingerprint: str | None) -> None:
        if fingerprint is not None and fingerprint != self.fingerprint:
            raise FingerprintError(f"feature fingerprint {fingerprint} does not match model {self.fingerprint}")

    def predict(self, X, fingerprint: str | None = None) -> np.ndarray:
        self.check_fingerprint(fingerprint)
        return np.asarray(self.classifier.predict(self.transform(X)), dtype=int)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "labels": list(self.labels),
            "fingerprint": self.fingerprint,
            "n_features": self.n_features,
            "standardizer": None if self.standardizer is None else self.standardizer.to_dict(),
            "reducer": self.reducer.to_dict(),
            "classifier": self.classifier.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, variant: str | None = None) -> "TrainedModel":
        config = ModelConfig.from_dict(d["config"])
        if variant is not None and config.variant != variant:
            raise ValueError(f"model is a {config.variant}, not a {variant}")
        return cls(
            config=config,
            labels=list(d["labels"]),
            fingerprint=d["fingerprint"],
            n_features=int(d["n_features"]),
            standardizer=None if d["standardizer"] is None else Standardizer.from_dict(d["standardizer"]),
            reducer=Reducer.from_dict(d["reducer"]),
            classifier=_CLASSIFIERS[config.variant].from_dict(d["classifier"]),
        )


def _n_components(config: ModelConfig, n_classes: int, n_features: int) -> int | None:
    if config.reducer == "none":
        return None
    if config.n_components is not None:
        return config.n_components
    if config.reducer == "lda":
        return min(n_classes - 1, n_features)
    return min(4, n_features)


def fit_classifier(variant: str, X, y, params: dict, seed: int = 0):
    if variant == "svm_ecoc":
        return train_svm_ecoc(X, y, gamma=params["gamma"], C=params["C"])
    if variant == "adaboost":
        return train_adaboost(X, y, rounds=params["rounds"])
    if variant == "random_forest":
        return train_random_forest(X, y, n_trees=params["n_trees"], bootstrap=params["bootstrap"],
                                   max_features=params["max_features"], min_leaf=params["min_leaf"], seed=seed)
    if variant == "mlp":
        return train_mlp(X, y, alpha1=params["alpha1"], alpha2=params["alpha2"], l2=params["l2"],
                         max_iter=params["max_iter"], seed=seed)
    raise ValueError(f"unknown variant {variant!r}")


def train_model(X, y, config: ModelConfig = ModelConfig(), fingerprint: str = "") -> TrainedModel:
    """Standardize, reduce and fit one classifier on windows ``X`` with labels ``y``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("training data contains a single class")
    std = Standardizer.fit(X) if config.standardize else None
    Z = std.transform(X) if std is not None else X
    reducer = fit_reducer(config.reducer, Z, y, _n_components(config, classes.size, X.shape[1]))
    R = reducer.reduce(Z)
    clf = fit_classifier(config.variant, R, y, config.resolved_params, config.seed)
    return TrainedModel(config, classes.tolist(), fingerprint, X.shape[1], std, reducer, clf)


def train_on_corpus(corpus, config: ModelConfig = ModelConfig()) -> TrainedModel:
    return train_model(corpus.X, corpus.y, config, corpus.fingerprint)
