"""Gaussian-kernel soft-margin SVMs combined by one-vs-all output codes.

The binary dual is solved by SMO with second-order working-set selection
(the pair maximising the guaranteed objective decrease). Multiclass
prediction picks the class whose code row has the smallest summed hinge
loss against the binary scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TAU = 1e-12
_FULL_KERNEL_MAX_N = 6000


class ConvergenceError(RuntimeError):
    """Optimizer stopped at its iteration limit before meeting the KKT tolerance."""

    def __init__(self, message: str, iterations: int, gap: float):
        super().__init__(f"{message} (iterations={iterations}, kkt gap={gap:.3g})")
        self.iterations = iterations
        self.gap = gap


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def default_gamma(X) -> float:
    """Kernel width 1 / (n_features * feature variance)."""
    X = np.asarray(X, dtype=float)
    var = float(X.var())
    return 1.0 / (X.shape[1] * (var if var > 0 else 1.0))


class _KernelColumns:
    """Kernel columns on demand; the full matrix is kept when it is small."""

    def __init__(self, X, gamma, cache_columns: int = 2000):
        self.X = X
        self.gamma = gamma
        self.n = X.shape[0]
        self.full = rbf_kernel(X, X, gamma) if self.n <= _FULL_KERNEL_MAX_N else None
        self.cache: dict[int, np.ndarray] = {}
        self.cache_columns = cache_columns
        self.diag = np.ones(self.n)

    def column(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[:, i]
        col = self.cache.get(i)
        if col is None:
            if len(self.cache) >= self.cache_columns:
                self.cache.pop(next(iter(self.cache)))
            col = rbf_kernel(self.X, self.X[i : i + 1], self.gamma)[:, 0]
            self.cache[i] = col
        return col


def smo(kernel: _KernelColumns, y, C: float, tol: float = 1e-3, max_iter: int | None = None):
    """Solve ``min 1/2 a'Qa - sum(a)`` s.t. ``0 <= a <= C, y'a = 0``.

    Returns ``(alpha, rho, iterations)``; the decision value of ``x`` is
    ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    G = -np.ones(n)
    Kd = kernel.diag
    pos = y > 0
    gap = np.inf
    it = 0
    while True:
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        myG = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, myG, -np.inf)))
        m = myG[i]
        M = np.min(np.where(low, myG, np.inf))
        gap = m - M
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError("SMO did not converge", it, gap)
        Ki = kernel.column(i)
        b = m - myG
        a = Kd[i] + Kd - 2.0 * Ki
        a = np.where(a > 0, a, _TAU)
        cand = low & (myG < m)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))
        Kj = kernel.column(j)
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = Kd[i] + Kd[j] - 2.0 * Ki[j]
            quad = quad if quad > 0 else _TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = Kd[i] + Kd[j] - 2.0 * Ki[j]
            quad = quad if quad > 0 else _TAU
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            ni, nj = ai - delta, aj + delta
            if s > C:
                if ni > C:
                    ni, nj = C, s - C
            elif nj < 0:
                nj, ni = 0.0, s
            if s > C:
                if nj > C:
                    nj, ni = C, s - C
            elif ni < 0:
                ni, nj = 0.0, s
        dai, daj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        G += y * (y[i] * dai * Ki + y[j] * daj * Kj)
        it += 1

    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & ~pos) | (at_lower & pos)
        lb_mask = (at_upper & pos) | (at_lower & ~pos)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub + lb) else 0.0
    return alpha, rho, it


@dataclass
class BinarySVM:
    support: np.ndarray  # (n_sv, d)
    coef: np.ndarray  # alpha_i * y_i
    rho: float
    gamma: float
    iterations: int = 0

    def decision(self, X) -> np.ndarray:
        if self.support.shape[0] == 0:
            return np.full(np.asarray(X).shape[0], -self.rho)
        return rbf_kernel(X, self.support, self.gamma) @ self.coef - self.rho

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "coef": self.coef.tolist(), "rho": self.rho,
                "gamma": self.gamma, "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d: dict) -> "BinarySVM":
        sup = np.array(d["support"], dtype=float).reshape(len(d["coef"]), -1)
        return cls(sup, np.array(d["coef"], dtype=float), float(d["rho"]), float(d["gamma"]), int(d["iterations"]))


def fit_binary_svm(X, y, gamma: float, C: float, tol: float = 1e-3, max_iter=None, kernel=None) -> BinarySVM:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if kernel is None:
        kernel = _KernelColumns(X, gamma)
    alpha, rho, it = smo(kernel, y, C, tol, max_iter)
    sv = alpha > 0
    return BinarySVM(X[sv].copy(), (alpha * y)[sv], rho, gamma, it)


def one_vs_all_codes(n_classes: int) -> np.ndarray:
    return 2.0 * np.eye(n_classes) - 1.0


def hinge_decode(scores: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Row index of ``codes`` with minimal summed hinge loss; ties go to the lowest index."""
    loss = np.maximum(0.0, 1.0 - codes[None, :, :] * scores[:, None, :]).sum(axis=2) / 2.0
    return np.argmin(loss, axis=1)


def argmax_decode(scores: np.ndarray) -> np.ndarray:
    return np.argmax(scores, axis=1)


@dataclass
class SvmEcoc:
    classes: np.ndarray
    learners: list
    gamma: float
    C: float

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.column_stack([m.decision(X) for m in self.learners])

    def predict(self, X, decoder: str = "hinge") -> np.ndarray:
        s = self.scores(X)
        if decoder == "hinge":
            idx = hinge_decode(s, one_vs_all_codes(len(self.classes)))
        elif decoder == "argmax":
            idx = argmax_decode(s)
        else:
            raise ValueError(f"unknown decoder {decoder!r}")
        return self.classes[idx]

    def to_dict(self) -> dict:
        return {"classes": self.classes.tolist(), "learners": [m.to_dict() for m in self.learners],
                "gamma": self.gamma, "C": self.C}

    @classmethod
    def from_dict(cls, d: dict) -> "SvmEcoc":
        return cls(np.array(d["classes"], dtype=int), [BinarySVM.from_dict(m) for m in d["learners"]],
                   float(d["gamma"]), float(d["C"]))


def train_svm_ecoc(X, y, gamma: float | None = None, C: float = 1.0, tol: float = 1e-3, max_iter=None) -> SvmEcoc:
    """One binary learner per class (that class positive, all others negative)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("svm needs at least two classes")
    if gamma is None:
        gamma = default_gamma(X)
    kernel = _KernelColumns(X, gamma)
    learners = [
        fit_binary_svm(X, np.where(y == c, 1.0, -1.0), gamma, C, tol, max_iter, kernel) for c in classes
    ]
    return SvmEcoc(classes, learners, float(gamma), float(C))
