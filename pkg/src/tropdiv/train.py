"""Deterministic mini-batch SGD for :class:`TwoLayerNet` and an sklearn wrapper."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset, train_validation_split
from .exceptions import DivergenceError
from .network import TwoLayerNet, preactivation


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.05
    seed: int = 0
    patience: int | None = None
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ValueError(f"invalid training configuration: {self}")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be a positive integer")

    def to_dict(self):
        return asdict(self)


def init_net(n_features, n_hidden, seed=0) -> TwoLayerNet:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (n_features + n_hidden))
    lim2 = np.sqrt(6.0 / (n_hidden + 1))
    W1 = rng.uniform(-lim1, lim1, size=(n_hidden, n_features))
    w2 = rng.uniform(-lim2, lim2, size=n_hidden)
    return TwoLayerNet(W1, np.zeros(n_hidden), w2, 0.0)


_BELOW_HALF = np.nextafter(0.5, 0.0)


def sigmoid(z):
    """Logistic function with ``sigmoid(z) >= 0.5`` exactly when ``z >= 0``."""
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    pos = 1.0 / (1.0 + e)
    return np.where(z >= 0, pos, np.minimum(e / (1.0 + e), _BELOW_HALF))


def bce_loss(net: TwoLayerNet, X, y):
    z = preactivation(net, np.atleast_2d(X))
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def loss_and_grad(params, X, y):
    """Mean binary cross-entropy and gradients for ``(W1, b1, w2, b2)``."""
    W1, b1, w2, b2 = params
    pre = X @ W1.T + b1
    H = np.maximum(pre, 0.0)
    z = H @ w2 + b2
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (sigmoid(z) - y) / len(y)
    gw2 = H.T @ dz
    gb2 = dz.sum()
    dpre = np.outer(dz, w2) * (pre > 0)
    gW1 = dpre.T @ X
    gb1 = dpre.sum(axis=0)
    return loss, (gW1, gb1, gw2, gb2)


def _params(net):
    return [net.W1.copy(), net.b1.copy(), net.w2.copy(), float(net.b2)]


def _net(params):
    return TwoLayerNet(*params)


def train(net: TwoLayerNet, data: Dataset, config: TrainConfig = TrainConfig(), history=None):
    """Plain SGD on binary cross-entropy; returns the trained network.

    With ``config.patience`` set, a validation split is held out and the
    snapshot with the lowest validation loss is returned. Per-epoch mean
    training losses are appended to ``history`` when a list is given.
    """
    if data.n_features != net.n_features:
        raise ValueError(f"data has {data.n_features} features, network expects {net.n_features}")
    if config.patience is not None:
        fit_data, val_data = train_validation_split(data, config.validation_fraction, config.seed)
    else:
        fit_data, val_data = data, None
    X, y = fit_data.features, fit_data.labels.astype(float)
    rng = np.random.default_rng(config.seed)
    params = _params(net)
    best, best_val, stale = _net(params), np.inf, 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(y))
        losses = []
        for start in range(0, len(y), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grad(params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise DivergenceError("training loss became non-finite",
                                      {"epoch": epoch, "batch_start": start, "loss": loss})
            losses.append(loss * len(idx))
            for k in range(4):
                params[k] = params[k] - config.learning_rate * grads[k]
        if history is not None:
            history.append(sum(losses) / len(y))
        if val_data is not None:
            current = _net(params)
            val = bce_loss(current, val_data.features, val_data.labels)
            if val < best_val:
                best, best_val, stale = current, val, 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    if val_data is not None and np.isfinite(best_val):
        return best
    return _net(params)


def predict_proba_net(net: TwoLayerNet, X):
    return sigmoid(preactivation(net, np.atleast_2d(X)))


def accuracy(net: TwoLayerNet, data: Dataset) -> float:
    """Fraction of samples whose thresholded sigmoid output equals the label."""
    pred = predict_proba_net(net, data.features) >= 0.5
    return float(np.mean(pred == data.labels.astype(bool)))


class TwoLayerReLUClassifier(ClassifierMixin, BaseEstimator):
    """ReLU hidden layer + sigmoid output, trained with seeded plain SGD.

    ``init_net`` starts training from an existing network (used for
    retraining after compression); otherwise weights are Glorot-uniform.
    """

    def __init__(self, n_hidden=64, epochs=20, batch_size=32, learning_rate=0.05,
                 random_state=0, patience=None, validation_fraction=0.2, init_net=None):
        self.n_hidden = n_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.init_net = init_net

    def _config(self):
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate,
                           int(self.random_state or 0), self.patience, self.validation_fraction)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        if len(self.classes_) > 2:
            raise ValueError("only binary targets are supported")
        y01 = (y == self.classes_[-1]).astype(int) if len(self.classes_) == 2 else np.zeros(len(y), int)
        start = self.init_net
        if start is None:
            start = init_net(X.shape[1], self.n_hidden, int(self.random_state or 0))
        self.loss_curve_ = []
        self.net_ = train(start, Dataset(X, y01), self._config(), history=self.loss_curve_)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_net(cls, net: TwoLayerNet, classes=(0, 1), **params):
        """Wrap an already trained network without fitting."""
        est = cls(n_hidden=net.n_hidden, **params)
        est.net_ = net
        est.classes_ = np.asarray(classes)
        est.n_features_in_ = net.n_features
        return est

    def decision_function(self, X):
        check_is_fitted(self, "net_")
        return preactivation(self.net_, check_array(X))

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) >= 0).astype(int)]

    def with_config(self, **changes):
        return replace(self._config(), **changes)
