"""Multiclass boosting with pseudo-loss (AdaBoost.M2) over decision stumps.

Weights live on (sample, wrong label) pairs. A stump answers with a 0/1
plausibility per class on each side of its threshold; the pseudo-loss of a
hypothesis ``h`` is

    eps = 1/2 * sum_{i, y != y_i} D(i, y) * (1 - h(x_i, y_i) + h(x_i, y)).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class Stump:
    feature: int
    threshold: float
    left: np.ndarray  # (K,) plausibilities for x[feature] <= threshold
    right: np.ndarray

    def plausibility(self, X) -> np.ndarray:
        x = np.asarray(X, dtype=float)[:, self.feature]
        return np.where((x <= self.threshold)[:, None], self.left[None, :], self.right[None, :])

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.tolist(), "right": self.right.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Stump":
        return cls(int(d["feature"]), float(d["threshold"]), np.array(d["left"], dtype=float),
                   np.array(d["right"], dtype=float))


def best_stump(X, yi, D, order=None) -> tuple[Stump, float]:
    """Stump minimising the pseudo-loss under mislabel weights ``D`` (n, K).

    ``yi`` holds class indices 0..K-1 and ``D[i, yi[i]]`` must be zero. For a
    leaf, setting ``h(c) = 1`` lowers the loss by ``A_c - B_c`` where ``A_c``
    is the weight of leaf samples of class ``c`` and ``B_c`` the weight on
    mislabel ``c`` of the other leaf samples, so the optimal leaf answer is
    ``h(c) = [A_c > B_c]`` and every threshold is scored from prefix sums.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    K = D.shape[1]
    W = D.sum(axis=1)
    contrib = -D.copy()
    contrib[np.arange(n), yi] = W
    total = contrib.sum(axis=0)
    if order is None:
        order = np.argsort(X, axis=0, kind="stable")
    best = (-np.inf, 0, 0.0, None, None)
    for f in range(p):
        o = order[:, f]
        xs = X[o, f]
        left = np.cumsum(contrib[o], axis=0)[:-1]  # split after position j
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        right = total[None, :] - left
        gain = np.maximum(left, 0).sum(1) + np.maximum(right, 0).sum(1)
        gain = np.where(valid, gain, -np.inf)
        j = int(np.argmax(gain))
        if gain[j] > best[0] + 1e-15:
            thr = 0.5 * (xs[j] + xs[j + 1])
            best = (gain[j], f, thr, (left[j] > 0).astype(float), (right[j] > 0).astype(float))
    if best[3] is None:
        # no feature varies: a constant hypothesis
        h = (total > 0).astype(float)
        return Stump(0, np.inf, h, h), 0.5 * (1.0 - np.maximum(total, 0).sum())
    gain, f, thr, hl, hr = best
    return Stump(f, float(thr), hl, hr), 0.5 * (1.0 - gain)


@dataclass
class AdaBoostM2:
    classes: np.ndarray
    stumps: list = field(default_factory=list)
    alphas: list = field(default_factory=list)  # ln(1 / beta_t)
    pseudo_losses: list = field(default_factory=list)
    bounds: list = field(default_factory=list)  # training-error bound after each round
    stopped_early: bool = False

    def votes(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        v = np.zeros((X.shape[0], len(self.classes)))
        for s, a in zip(self.stumps, self.alphas):
            v += a * s.plausibility(X)
        return v

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.votes(X), axis=1)]

    def to_dict(self) -> dict:
        return {"classes": self.classes.tolist(), "stumps": [s.to_dict() for s in self.stumps],
                "alphas": list(self.alphas), "pseudo_losses": list(self.pseudo_losses),
                "bounds": list(self.bounds), "stopped_early": self.stopped_early}

    @classmethod
    def from_dict(cls, d: dict) -> "AdaBoostM2":
        return cls(np.array(d["classes"], dtype=int), [Stump.from_dict(s) for s in d["stumps"]],
                   [float(a) for a in d["alphas"]], [float(e) for e in d["pseudo_losses"]],
                   [float(b) for b in d["bounds"]], bool(d["stopped_early"]))


def train_adaboost(X, y, rounds: int = 100, min_loss: float = 1e-10) -> AdaBoostM2:
    """Boost ``rounds`` stumps; stops early once a stump is no better than chance."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    K = classes.size
    if K < 2:
        raise ValueError("boosting needs at least two classes")
    n = X.shape[0]
    yi = np.searchsorted(classes, y)
    D = np.full((n, K), 1.0 / (n * (K - 1)))
    D[np.arange(n), yi] = 0.0
    order = np.argsort(X, axis=0, kind="stable")
    model = AdaBoostM2(classes)
    bound = float(K - 1)
    for t in range(rounds):
        stump, eps = best_stump(X, yi, D, order)
        if eps >= 0.5:
            model.stopped_early = True
            log.info("round %d: pseudo-loss %.4f >= 1/2, stopping", t, eps)
            break
        eps_c = max(eps, min_loss)
        beta = eps_c / (1.0 - eps_c)
        h = stump.plausibility(X)
        h_true = h[np.arange(n), yi]
        D = D * beta ** (0.5 * (1.0 + h_true[:, None] - h))
        D[np.arange(n), yi] = 0.0
        D /= D.sum()
        bound *= 2.0 * np.sqrt(eps_c * (1.0 - eps_c))
        model.stumps.append(stump)
        model.alphas.append(float(np.log(1.0 / beta)))
        model.pseudo_losses.append(float(eps))
        model.bounds.append(float(bound))
        log.debug("round %d: pseudo-loss %.5f, bound %.5g", t, eps, bound)
        if eps <= min_loss:
            break
    return model
