"""Desk-scale model families and local SGD training on flat parameter vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Shard


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.5
    batch_size: int = 50
    epochs: int = 5

    def __post_init__(self):
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ValueError(f"bad optimizer settings: lr={self.learning_rate}, momentum={self.momentum}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError(f"batch_size and epochs must be positive: {self.batch_size}, {self.epochs}")


class Model:
    """A model family: maps a flat parameter vector to a loss and predictions."""

    kind = "base"
    classification = True

    def num_params(self) -> int:
        raise NotImplementedError

    def loss_and_grad(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def predict(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loss(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
        return self.loss_and_grad(params, x, y)[0]

    def init_params(self, rng: np.random.Generator, scale: float = 0.01) -> np.ndarray:
        return rng.normal(0.0, scale, size=self.num_params())


class LinearRegression(Model):
    """``y ~ x @ w + b``, mean squared error."""

    kind = "linear"
    classification = False

    def __init__(self, dims: int):
        self.dims = dims

    def num_params(self) -> int:
        return self.dims + 1

    def predict(self, params, x):
        return x @ params[:-1] + params[-1]

    def loss_and_grad(self, params, x, y):
        r = self.predict(params, x) - y
        n = x.shape[0]
        grad = np.empty_like(params)
        grad[:-1] = 2.0 * (x.T @ r) / n
        grad[-1] = 2.0 * r.sum() / n
        return float(r @ r / n), grad


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class LogisticRegression(Model):
    """Multinomial logistic regression; params are a row-major (classes, dims+1) matrix."""

    kind = "logistic"

    def __init__(self, dims: int, classes: int):
        self.dims = dims
        self.classes = classes

    def num_params(self) -> int:
        return self.classes * (self.dims + 1)

    def _unpack(self, params):
        m = params.reshape(self.classes, self.dims + 1)
        return m[:, :-1], m[:, -1]

    def logits(self, params, x):
        w, b = self._unpack(params)
        return x @ w.T + b

    def predict(self, params, x):
        return self.logits(params, x).argmax(axis=1)

    def loss_and_grad(self, params, x, y):
        n = x.shape[0]
        logp = _log_softmax(self.logits(params, x))
        y = y.astype(np.int64)
        loss = -logp[np.arange(n), y].mean()
        d = np.exp(logp)
        d[np.arange(n), y] -= 1.0
        d /= n
        grad = np.concatenate([d.T @ x, d.sum(axis=0)[:, None]], axis=1)
        return float(loss), grad.reshape(-1)


class MLP(Model):
    """One tanh hidden layer followed by a softmax output layer."""

    kind = "mlp"

    def __init__(self, dims: int, classes: int, hidden: int = 32):
        self.dims = dims
        self.classes = classes
        self.hidden = hidden

    def num_params(self) -> int:
        return self.hidden * (self.dims + 1) + self.classes * (self.hidden + 1)

    def init_params(self, rng, scale=None):
        # Glorot-style scale so the hidden layer is not saturated at init
        w1 = rng.normal(0.0, 1.0 / math.sqrt(self.dims), size=(self.hidden, self.dims + 1))
        w2 = rng.normal(0.0, 1.0 / math.sqrt(self.hidden), size=(self.classes, self.hidden + 1))
        w1[:, -1] = 0.0
        w2[:, -1] = 0.0
        return np.concatenate([w1.reshape(-1), w2.reshape(-1)])

    def _unpack(self, params):
        split = self.hidden * (self.dims + 1)
        w1 = params[:split].reshape(self.hidden, self.dims + 1)
        w2 = params[split:].reshape(self.classes, self.hidden + 1)
        return w1, w2

    def _forward(self, params, x):
        w1, w2 = self._unpack(params)
        h = np.tanh(x @ w1[:, :-1].T + w1[:, -1])
        z = h @ w2[:, :-1].T + w2[:, -1]
        return h, z

    def predict(self, params, x):
        return self._forward(params, x)[1].argmax(axis=1)

    def loss_and_grad(self, params, x, y):
        n = x.shape[0]
        w1, w2 = self._unpack(params)
        h, z = self._forward(params, x)
        logp = _log_softmax(z)
        y = y.astype(np.int64)
        loss = -logp[np.arange(n), y].mean()
        dz = np.exp(logp)
        dz[np.arange(n), y] -= 1.0
        dz /= n
        g2 = np.concatenate([dz.T @ h, dz.sum(axis=0)[:, None]], axis=1)
        dh = (dz @ w2[:, :-1]) * (1.0 - h * h)
        g1 = np.concatenate([dh.T @ x, dh.sum(axis=0)[:, None]], axis=1)
        return float(loss), np.concatenate([g1.reshape(-1), g2.reshape(-1)])


def make_model(kind: str, dims: int, classes: int = 1, hidden: int = 32) -> Model:
    kind = kind.lower()
    if kind in ("linear", "linreg"):
        return LinearRegression(dims)
    if kind == "logistic":
        return LogisticRegression(dims, classes)
    if kind == "mlp":
        return MLP(dims, classes, hidden)
    raise ValueError(f"unknown model kind {kind!r}; expected linear, logistic or mlp")


def local_train(
    model: Model,
    params: np.ndarray,
    shard: Shard,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run ``cfg.epochs`` passes of minibatch SGD with classical momentum.

    The velocity starts at zero on every call. Returns a new vector; the
    input is left untouched.
    """
    p = np.array(params, dtype=np.float64)
    if p.shape[0] != model.num_params():
        raise ValueError(f"expected {model.num_params()} parameters, got {p.shape[0]}")
    if cfg.learning_rate == 0.0:
        return p
    v = np.zeros_like(p)
    n = len(shard)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, g = model.loss_and_grad(p, shard.features[idx], shard.labels[idx])
            if not math.isfinite(loss) or not np.all(np.isfinite(g)):
                raise TrainingDiverged(
                    f"non-finite loss {loss} in epoch {epoch} at batch offset {start} "
                    f"(lr={cfg.learning_rate}, |params|={np.linalg.norm(p):.3g})"
                )
            v = cfg.momentum * v + g
            p -= cfg.learning_rate * v
    return p


def evaluate(model: Model, params: np.ndarray, test: Shard) -> tuple[float, float]:
    """Mean loss and accuracy on ``test``.

    Accuracy is top-1 for classifiers. For regression it is the coefficient
    of determination clipped to [0, 1], so that it stays a fraction.
    """
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    x, y = test.features, test.labels
    loss = model.loss(params, x, y)
    if model.classification:
        acc = float(np.mean(model.predict(params, x) == y.astype(np.int64)))
    else:
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - loss * len(y) / ss_tot if ss_tot > 0 else float(loss == 0.0)
        acc = min(max(r2, 0.0), 1.0)
    return loss, acc
