"""Two-hidden-layer ReLU network with softmax output trained by L-BFGS.

Hidden widths follow the input width: ``n1 = round(a1 * n0)`` and
``n2 = round(a2 * n1)``, so the connection count grows quadratically in
``n0``: ``n0^2 (a1 + a1^2 a2) + a1 a2 n0 nf`` before rounding.
"""

from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import line_search

from .svm import ConvergenceError

log = logging.getLogger(__name__)

ALPHA_RANGE = (2.0 / 3.0, 2.0)


def _round(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class MlpShape:
    n0: int
    alpha1: float = 1.0
    alpha2: float = 1.0
    n_out: int = 4

    def __post_init__(self):
        lo, hi = ALPHA_RANGE
        for a in (self.alpha1, self.alpha2):
            if not lo - 1e-12 <= a <= hi + 1e-12:
                raise ValueError(f"width factor {a} outside [{lo:.4g}, {hi}]")
        if self.n0 < 1 or self.n_out < 2:
            raise ValueError("need n0 >= 1 and at least two outputs")

    @property
    def n1(self) -> int:
        return max(1, _round(self.alpha1 * self.n0))

    @property
    def n2(self) -> int:
        return max(1, _round(self.alpha2 * self.n1))

    @property
    def layer_sizes(self) -> tuple[int, int, int, int]:
        return (self.n0, self.n1, self.n2, self.n_out)

    @property
    def n_connections(self) -> int:
        a, b, c, d = self.layer_sizes
        return a * b + b * c + c * d

    @property
    def n_parameters(self) -> int:
        return self.n_connections + self.n1 + self.n2 + self.n_out

    def connection_formula(self) -> float:
        """Closed-form connection count without rounding the hidden widths."""
        n0, a1, a2, nf = self.n0, self.alpha1, self.alpha2, self.n_out
        return n0 * n0 * (a1 + a1 * a1 * a2) + a1 * a2 * n0 * nf


def _unpack(theta, sizes):
    out, k = [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        W = theta[k : k + a * b].reshape(a, b)
        k += a * b
        bias = theta[k : k + b]
        k += b
        out.append((W, bias))
    return out


def init_params(shape: MlpShape, rng: np.random.Generator) -> np.ndarray:
    """Weights uniform in +-1/sqrt(fan_in), zero biases."""
    parts = []
    sizes = shape.layer_sizes
    for a, b in zip(sizes[:-1], sizes[1:]):
        r = 1.0 / np.sqrt(a)
        parts.append(rng.uniform(-r, r, size=a * b))
        parts.append(np.zeros(b))
    return np.concatenate(parts)


def softmax(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def forward(theta, shape: MlpShape, X) -> np.ndarray:
    (W1, b1), (W2, b2), (W3, b3) = _unpack(theta, shape.layer_sizes)
    H1 = np.maximum(X @ W1 + b1, 0.0)
    H2 = np.maximum(H1 @ W2 + b2, 0.0)
    return softmax(H2 @ W3 + b3)


def loss_and_grad(theta, shape: MlpShape, X, Y, l2: float = 0.0):
    """Mean cross-entropy (plus ``l2/2 * |W|^2``) and its gradient; ``Y`` is one-hot."""
    (W1, b1), (W2, b2), (W3, b3) = _unpack(theta, shape.layer_sizes)
    n = X.shape[0]
    A1 = X @ W1 + b1
    H1 = np.maximum(A1, 0.0)
    A2 = H1 @ W2 + b2
    H2 = np.maximum(A2, 0.0)
    Z = H2 @ W3 + b3
    Z = Z - Z.max(axis=1, keepdims=True)
    logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
    loss = -np.sum(Y * logp) / n
    loss += 0.5 * l2 * (np.sum(W1 * W1) + np.sum(W2 * W2) + np.sum(W3 * W3))
    dZ = (np.exp(logp) - Y) / n
    gW3 = H2.T @ dZ + l2 * W3
    gb3 = dZ.sum(0)
    dA2 = (dZ @ W3.T) * (A2 > 0)
    gW2 = H1.T @ dA2 + l2 * W2
    gb2 = dA2.sum(0)
    dA1 = (dA2 @ W2.T) * (A1 > 0)
    gW1 = X.T @ dA1 + l2 * W1
    gb1 = dA1.sum(0)
    grad = np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2, gW3.ravel(), gb3])
    return float(loss), grad


class LineSearchFailure(RuntimeError):
    pass


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    message: str


def lbfgs(fun, x0, history: int = 10, gtol: float = 1e-6, ftol: float = 1e-9, max_iter: int = 1000) -> LbfgsResult:
    """Limited-memory BFGS (two-loop recursion) with a strong-Wolfe line search.

    ``fun(x)`` returns ``(f, grad)``. Raises ``LineSearchFailure`` when no
    acceptable step exists even along steepest descent.
    """
    cache = {}

    def evaluate(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = fun(x)
        return cache[key]

    def wolfe_step(x, d, g, f):
        # a failed search returns None and is handled by the caller
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="The line search algorithm did not converge")
            return line_search(lambda z: evaluate(z)[0], lambda z: evaluate(z)[1], x, d, gfk=g, old_fval=f,
                               c1=1e-4, c2=0.9, maxiter=30)[0]

    x = np.array(x0, dtype=float)
    f, g = evaluate(x)
    if not np.isfinite(f):
        raise LineSearchFailure("non-finite initial loss")
    S: deque = deque(maxlen=history)
    Yd: deque = deque(maxlen=history)
    for it in range(max_iter):
        if np.max(np.abs(g)) < gtol:
            return LbfgsResult(x, f, it, True, "gradient tolerance")
        q = g.copy()
        coefs = []
        for s, y in reversed(list(zip(S, Yd))):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            q -= a * y
            coefs.append((rho, a, s, y))
        if S:
            s, y = S[-1], Yd[-1]
            q *= (s @ y) / (y @ y)
        for rho, a, s, y in reversed(coefs):
            b = rho * (y @ q)
            q += (a - b) * s
        d = -q
        if g @ d >= 0:
            S.clear()
            Yd.clear()
            d = -g
        step = wolfe_step(x, d, g, f)
        if step is None and S:
            S.clear()
            Yd.clear()
            d = -g
            step = wolfe_step(x, d, g, f)
        if step is None:
            raise LineSearchFailure(f"line search failed at iteration {it}")
        x_new = x + step * d
        f_new, g_new = evaluate(x_new)
        if not np.isfinite(f_new):
            raise LineSearchFailure(f"non-finite loss at iteration {it}")
        s, y = x_new - x, g_new - g
        if s @ y > 1e-10 * (y @ y):
            S.append(s)
            Yd.append(y)
        done = abs(f - f_new) <= ftol * max(1.0, abs(f))
        x, f, g = x_new, f_new, g_new
        if done:
            return LbfgsResult(x, f, it + 1, True, "loss tolerance")
    return LbfgsResult(x, f, max_iter, False, "iteration limit")


@dataclass
class Mlp:
    classes: np.ndarray
    shape: MlpShape
    theta: np.ndarray
    loss: float = float("nan")
    iterations: int = 0
    restarts: int = 0
    info: dict = field(default_factory=dict)

    def predict_proba(self, X) -> np.ndarray:
        return forward(self.theta, self.shape, np.asarray(X, dtype=float))

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.predict_proba(X), axis=1)]

    def to_dict(self) -> dict:
        return {"classes": self.classes.tolist(), "shape": asdict(self.shape), "theta": self.theta.tolist(),
                "loss": self.loss, "iterations": self.iterations, "restarts": self.restarts}

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        return cls(np.array(d["classes"], dtype=int), MlpShape(**d["shape"]), np.array(d["theta"], dtype=float),
                   float(d["loss"]), int(d["iterations"]), int(d["restarts"]))


def train_mlp(
    X,
    y,
    alpha1: float = 1.0,
    alpha2: float = 1.0,
    l2: float = 0.0,
    max_iter: int = 1000,
    gtol: float = 1e-6,
    seed: int = 0,
    max_restarts: int = 3,
) -> Mlp:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("mlp needs at least two classes")
    shape = MlpShape(X.shape[1], alpha1, alpha2, classes.size)
    Y = np.zeros((X.shape[0], classes.size))
    Y[np.arange(X.shape[0]), np.searchsorted(classes, y)] = 1.0
    last_error = None
    for attempt in range(max_restarts + 1):
        rng = np.random.default_rng([seed, attempt])
        theta0 = init_params(shape, rng)
        try:
            res = lbfgs(lambda th: loss_and_grad(th, shape, X, Y, l2), theta0, gtol=gtol, max_iter=max_iter)
        except LineSearchFailure as exc:
            log.warning("mlp attempt %d failed: %s", attempt, exc)
            last_error = exc
            continue
        if res.iterations == 0 and attempt < max_restarts:
            # every ReLU path dead at the start: the gradient is zero and nothing trains
            log.info("mlp attempt %d: zero gradient at initialization, redrawing", attempt)
            last_error = "zero gradient at initialization"
            continue
        return Mlp(classes, shape, res.x, res.fun, res.iterations, attempt, {"message": res.message})
    raise ConvergenceError(f"mlp training failed after {max_restarts} restarts: {last_error}", max_iter, float("nan"))
