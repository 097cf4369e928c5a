"""Tropical compression of two-layer ReLU classifiers.

Phase 1 counts, over a sample of inputs, which Extended-Newton-Polytope
vertex each signed part of the network activates, and builds a smaller
hidden layer from the most frequent vertices. Phase 2 restores the output
bias as the mean residual over the sample.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset, sample_subset
from .network import (TropicalPart, TwoLayerNet, activation_patterns, decompose,
                      pack_pattern, part_value, preactivation)
from .train import TrainConfig, accuracy, train

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class VertexEntry:
    pattern: bytes
    extended: np.ndarray
    count: int


@dataclass(frozen=True)
class VertexStats:
    """Activated vertices, most frequent first; ties broken by pattern bytes."""

    entries: tuple

    def __len__(self):
        return len(self.entries)

    @property
    def total(self):
        return sum(e.count for e in self.entries)


def harvest_vertices(part: TropicalPart, X) -> VertexStats:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        raise ValueError("need at least one sample")
    if part.n_units == 0:
        return VertexStats((VertexEntry(b"", np.zeros(X.shape[1] + 1), len(X)),))
    masks = activation_patterns(part, X)
    packed = np.packbits(masks, axis=1)
    uniq, first, counts = np.unique(packed, axis=0, return_index=True, return_counts=True)
    rows = part.extended_rows
    entries = []
    for row, idx, count in zip(uniq, first, counts):
        ext = masks[idx].astype(float) @ rows
        entries.append(VertexEntry(row.tobytes(), ext, int(count)))
    entries.sort(key=lambda e: (-e.count, e.pattern))
    return VertexStats(tuple(entries))


def phase1(stats: VertexStats, k: int, rng=None):
    """Assign ``k`` extended weight rows from the sorted vertices.

    Row 0 is the most frequent vertex. Each following vertex ``u_j`` is
    subtracted from a uniformly chosen earlier row and becomes row ``j``.
    Rows beyond the number of distinct vertices stay zero.

    Returns ``(rows, n_zero_filled)``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng(rng)
    dim = stats.entries[0].extended.size
    rows = np.zeros((k, dim))
    used = min(k, len(stats))
    rows[0] = stats.entries[0].extended
    for j in range(1, used):
        u = stats.entries[j].extended
        pick = int(rng.integers(0, j))
        rows[pick] -= u
        rows[j] = u
    return rows, k - used


def phase2(net: TwoLayerNet, reduced: TwoLayerNet, X) -> float:
    """Output bias for ``reduced``: mean residual against ``net`` plus ``net.b2``.

    The bias already stored on ``reduced`` is ignored.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        raise ValueError("need at least one sample")
    original = preactivation(net, X) - net.b2
    approx = preactivation(reduced, X) - reduced.b2
    return float(np.mean(original - approx) + net.b2)


def mean_quotient(p, d, X) -> float:
    """Constant quotient minimising ``sum_x (q0 + d(x) - p(x))^2``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        raise ValueError("need at least one sample")
    return float(np.mean(_values(p, X) - _values(d, X)))


def _values(f, X):
    if isinstance(f, TropicalPart):
        return part_value(f, X)
    return np.asarray(f(X), dtype=float)


def goal_orig(q_values, d_values, p_values):
    return float(np.sum((np.asarray(q_values) + d_values - p_values) ** 2))


def budget_split(total, n_plus, n_minus):
    """Largest-remainder split of ``total`` rows proportional to part sizes."""
    sizes = [n_plus, n_minus]
    n = n_plus + n_minus
    if n == 0:
        return 0, 0
    quotas = [total * s / n for s in sizes]
    alloc = [math.floor(q) for q in quotas]
    order = sorted(range(2), key=lambda k: (-(quotas[k] - alloc[k]), k))
    for k in order[:total - sum(alloc)]:
        alloc[k] += 1
    return alloc[0], alloc[1]


@dataclass
class CompressionReport:
    fraction: float
    original_neurons: int
    compressed_neurons: int
    positive_neurons: int
    negative_neurons: int
    zero_filled: int
    distinct_vertices_plus: int
    distinct_vertices_minus: int
    bias: float
    rmse: float
    accuracy_before: float | None = None
    accuracy_after: float | None = None
    subset_size: int = 0
    seed: int = 0
    dataset: str = ""
    variant: str = "reduced"
    schema_version: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema_version')!r}")
        fields = cls.__dataclass_fields__
        unknown = set(data) - set(fields)
        if unknown:
            raise ValueError(f"unknown report field(s): {', '.join(sorted(unknown))}")
        required = [k for k in ("fraction", "original_neurons", "compressed_neurons") if k not in data]
        if required:
            raise ValueError(f"report is missing field(s): {', '.join(required)}")
        return cls(**data)


def _part_rows(part, stats, k, rng):
    if k == 0:
        return np.zeros((0, stats.entries[0].extended.size)), 0
    return phase1(stats, k, rng)


def compress(net: TwoLayerNet, X, fraction: float, seed: int = 0, eval_data: Dataset | None = None):
    """Shrink the hidden layer to ``ceil(fraction * n_hidden)`` units.

    Returns ``(compressed_net, CompressionReport)``. ``X`` is the sample
    used for vertex harvesting and bias correction; accuracies are filled in
    when ``eval_data`` is given.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p_plus, p_minus, _ = decompose(net)
    total = math.ceil(fraction * net.n_hidden - 1e-12)
    k_plus, k_minus = budget_split(total, p_plus.n_units, p_minus.n_units)
    for part, k, name in ((p_plus, k_plus, "positive"), (p_minus, k_minus, "negative")):
        if part.n_units and k == 0:
            raise ValueError(f"fraction {fraction} leaves no neurons for the non-empty {name} part")

    rng = np.random.default_rng(seed)
    stats_plus = harvest_vertices(p_plus, X)
    stats_minus = harvest_vertices(p_minus, X)
    rows_plus, zero_plus = _part_rows(p_plus, stats_plus, k_plus, rng)
    rows_minus, zero_minus = _part_rows(p_minus, stats_minus, k_minus, rng)
    rows = np.vstack([rows_plus, rows_minus])
    d = net.n_features
    w2 = np.concatenate([np.ones(k_plus), -np.ones(k_minus)])
    reduced = TwoLayerNet(rows[:, :d], rows[:, d], w2, 0.0)
    bias = phase2(net, reduced, X)
    compressed = TwoLayerNet(reduced.W1, reduced.b1, reduced.w2, bias)
    if zero_plus or zero_minus:
        log.info("only %d/%d distinct vertices; %d rows zero-filled",
                 len(stats_plus), len(stats_minus), zero_plus + zero_minus)

    resid = preactivation(net, X) - preactivation(compressed, X)
    report = CompressionReport(
        fraction=float(fraction),
        original_neurons=net.n_hidden,
        compressed_neurons=compressed.n_hidden,
        positive_neurons=k_plus,
        negative_neurons=k_minus,
        zero_filled=zero_plus + zero_minus,
        distinct_vertices_plus=len(stats_plus) if p_plus.n_units else 0,
        distinct_vertices_minus=len(stats_minus) if p_minus.n_units else 0,
        bias=bias,
        rmse=float(np.sqrt(np.mean(resid ** 2))),
        subset_size=len(X),
        seed=seed,
    )
    if eval_data is not None:
        report.accuracy_before = accuracy(net, eval_data)
        report.accuracy_after = accuracy(compressed, eval_data)
        report.dataset = eval_data.tag
    return compressed, report


def iterative_compress(net: TwoLayerNet, train_data: Dataset, X, halvings: int,
                       config: TrainConfig = TrainConfig(epochs=10), seed: int = 0,
                       eval_data: Dataset | None = None):
    """Alternate halving the hidden layer and retraining both layers.

    Returns ``(net, reports)`` with one report per halving.
    """
    if halvings < 1:
        raise ValueError("halvings must be at least 1")
    reports = []
    current = net
    for it in range(halvings):
        current, report = compress(current, X, 0.5, seed=seed + it, eval_data=eval_data)
        if config.epochs > 0:
            current = train(current, train_data, replace_seed(config, config.seed + it))
        if eval_data is not None:
            report.accuracy_after = accuracy(current, eval_data)
        report.variant = "iterative"
        report.extra = {"iteration": it + 1, "retrain_epochs": config.epochs}
        reports.append(report)
    return current, reports


def replace_seed(config: TrainConfig, seed):
    return TrainConfig(**{**config.to_dict(), "seed": seed})


def _assign(q, degrees, X):
    scores = X @ degrees.T + q
    return scores.argmax(axis=1), scores.max(axis=1)


def maxlinear_fit(X, target, degrees, init, max_iters=100, d_values=None, history=None):
    """Fit ``q(x) = max_c (q_c + c . x)`` with fixed term degrees to samples.

    Alternates assigning each sample to its maximising term and refitting
    every term's offset by least squares (the mean residual of its
    samples). The objective ``sum (q(x) + d(x) - target)^2`` is made
    monotone by halving the step towards the refit whenever a full step
    would increase it; the loop stops once the assignment is stable, no
    step improves, or ``max_iters`` is reached. A term left without samples
    takes over the single worst-fitted sample.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    degrees = np.atleast_2d(np.asarray(degrees, dtype=float))
    if X.shape[1] != degrees.shape[1]:
        X = X.reshape(-1, degrees.shape[1])
    t = np.asarray(target, dtype=float).ravel()
    if d_values is not None:
        t = t - np.asarray(d_values, dtype=float).ravel()
    if len(t) == 0 or len(degrees) == 0:
        raise ValueError("need samples and at least one term")
    q = np.asarray(init, dtype=float).ravel().copy()
    lin = X @ degrees.T

    def objective(qv):
        return float(np.sum(((lin + qv).max(axis=1) - t) ** 2))

    best = objective(q)
    if history is not None:
        history.append(best)
    prev_assign = None
    for _ in range(max_iters):
        assign = (lin + q).argmax(axis=1)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign
        resid = t[:, None] - lin  # offset each term would need per sample
        fitted = q.copy()
        taken = set()
        for c in range(len(q)):
            members = np.flatnonzero(assign == c)
            if members.size == 0:
                err = ((lin + q).max(axis=1) - t) ** 2
                err[list(taken)] = -np.inf
                worst = int(err.argmax())
                taken.add(worst)
                members = np.array([worst])
            fitted[c] = resid[members, c].mean()
        step, improved = 1.0, False
        while step > 1e-6:
            trial = q + step * (fitted - q)
            val = objective(trial)
            if val <= best - 1e-12 * max(1.0, best):
                q, best, improved = trial, val, True
                break
            step *= 0.5
        if history is not None:
            history.append(best)
        if not improved:
            break
    return q


class MaxAffineRegressor(RegressorMixin, BaseEstimator):
    """sklearn wrapper around :func:`maxlinear_fit` with fixed term degrees."""

    def __init__(self, degrees=None, init=None, max_iter=100):
        self.degrees = degrees
        self.init = init
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        degrees = np.atleast_2d(np.asarray(self.degrees, dtype=float))
        init = np.zeros(len(degrees)) if self.init is None else self.init
        self.objective_curve_ = []
        self.coef_ = maxlinear_fit(X, y, degrees, init, self.max_iter,
                                   history=self.objective_curve_)
        self.degrees_ = degrees
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return (X @ self.degrees_.T + self.coef_).max(axis=1)


class TropicalCompressor(TransformerMixin, BaseEstimator):
    """Compress a fitted two-layer network using samples passed to ``fit``.

    ``fit(X)`` harvests vertices on (a random subset of) ``X``; the result
    is available as ``net_`` and ``report_``. ``transform`` returns the
    compressed network's pre-sigmoid output, ``predict`` its class labels.
    """

    def __init__(self, net=None, fraction=0.5, subset=2000, random_state=0):
        self.net = net
        self.fraction = fraction
        self.subset = subset
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        if self.net is None:
            raise ValueError("TropicalCompressor needs a network to compress")
        seed = int(self.random_state or 0)
        if len(X) > self.subset:
            idx = np.sort(np.random.default_rng(seed).choice(len(X), self.subset, replace=False))
            X = X[idx]
        self.net_, self.report_ = compress(self.net, X, self.fraction, seed)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "net_")
        return preactivation(self.net_, check_array(X)).reshape(-1, 1)

    def predict(self, X):
        return (self.transform(X).ravel() >= 0).astype(int)

    def score(self, X, y):
        return float(np.mean(self.predict(X) == np.asarray(y)))


def harvest_subset(data: Dataset, size, seed):
    return sample_subset(data, size, seed).features
