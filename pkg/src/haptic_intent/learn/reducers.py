"""Feature standardization and linear dimensionality reduction (PCA, LDA)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale < 1e-12] = 1.0  # constant features stay at zero
        return cls(mean, scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float))


@dataclass
class Reducer:
    """Affine map ``x -> W (x - mean)``; ``kind="none"`` passes features through."""

    kind: str
    mean: np.ndarray | None = None
    projection: np.ndarray | None = None  # (d, n_features)

    @property
    def n_components(self) -> int | None:
        return None if self.projection is None else int(self.projection.shape[0])

    def reduce(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.kind == "none":
            return X
        return (X - self.mean) @ self.projection.T

    def to_dict(self) -> dict:
        if self.kind == "none":
            return {"kind": "none"}
        return {"kind": self.kind, "mean": self.mean.tolist(), "projection": self.projection.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Reducer":
        if d["kind"] == "none":
            return cls("none")
        return cls(d["kind"], np.array(d["mean"], dtype=float), np.array(d["projection"], dtype=float))


def identity_reducer() -> Reducer:
    return Reducer("none")


def _fix_signs(W: np.ndarray) -> np.ndarray:
    # eigenvectors are defined up to sign: make the largest-magnitude entry positive
    idx = np.argmax(np.abs(W), axis=1)
    signs = np.sign(W[np.arange(W.shape[0]), idx])
    signs[signs == 0] = 1.0
    return W * signs[:, None]


def fit_pca(X, d: int) -> Reducer:
    """Top-``d`` principal directions of the sample covariance."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 1 <= d <= p:
        raise ValueError(f"pca dimension {d} outside 1..{p}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / max(n, 1)
    vals, vecs = eigh(cov)
    order = np.argsort(vals)[::-1][:d]
    W = _fix_signs(vecs[:, order].T)
    return Reducer("pca", mean, W)


def scatter_matrices(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    mean = X.mean(axis=0)
    p = X.shape[1]
    Sw = np.zeros((p, p))
    Sb = np.zeros((p, p))
    for c in np.unique(y):
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        D = Xc - mc
        Sw += D.T @ D
        dm = (mc - mean)[:, None]
        Sb += len(Xc) * (dm @ dm.T)
    return Sw, Sb


def fit_lda(X, y, d: int, ridge: float = 1e-6) -> Reducer:
    """Fisher discriminant directions from ``Sb w = lambda (Sw + ridge) w``.

    The ridge is relative to the mean diagonal of the within-class scatter so
    that singular scatter (e.g. duplicated features) stays solvable.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    p = X.shape[1]
    if classes.size < 2:
        raise ValueError("lda needs at least two classes")
    if np.any(counts < 2):
        raise ValueError("every class needs at least two samples for lda")
    if not 1 <= d <= min(classes.size - 1, p):
        raise ValueError(f"lda dimension {d} outside 1..{min(classes.size - 1, p)}")
    Sw, Sb = scatter_matrices(X, y)
    lam = ridge * max(np.trace(Sw) / p, 1e-12)
    vals, vecs = eigh(Sb, Sw + lam * np.eye(p))
    order = np.argsort(vals)[::-1][:d]
    W = _fix_signs(vecs[:, order].T)
    return Reducer("lda", X.mean(axis=0), W)


def fit_reducer(kind: str, X, y=None, d: int | None = None) -> Reducer:
    if kind == "none":
        return identity_reducer()
    if kind == "pca":
        return fit_pca(X, d)
    if kind == "lda":
        return fit_lda(X, y, d)
    raise ValueError(f"unknown reducer {kind!r}")
