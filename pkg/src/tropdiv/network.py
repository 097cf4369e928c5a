"""Two-layer ReLU binary classifiers as differences of tropical polynomials.

The pre-sigmoid output ``sum_i w2_i max(W1_i . x + b1_i, 0) + b2`` splits by
the sign of ``w2`` into ``p_plus(x) - p_minus(x) + b2``; each part is a
sum of scaled hinge functions, i.e. a tropical polynomial whose Newton
polytope is a zonotope.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .polytope import zonotope_generators
from .tropical import TropicalPolynomial, evaluate


@dataclass(frozen=True, eq=False)
class TwoLayerNet:
    """Hidden layer ``(W1, b1)`` with ReLU, scalar output ``(w2, b2)``."""

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def __post_init__(self):
        W1 = np.atleast_2d(np.asarray(self.W1, dtype=float))
        b1 = np.asarray(self.b1, dtype=float).ravel()
        w2 = np.asarray(self.w2, dtype=float).ravel()
        if not (len(W1) == len(b1) == len(w2)):
            raise DimensionError(
                f"hidden sizes disagree: W1 {W1.shape}, b1 {b1.shape}, w2 {w2.shape}")
        b2 = float(self.b2)
        if not all(np.all(np.isfinite(a)) for a in (W1, b1, w2, b2)):
            raise ValueError("network parameters must be finite")
        for a in (W1, b1, w2):
            a.setflags(write=False)
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)

    @property
    def n_hidden(self):
        return self.W1.shape[0]

    @property
    def n_features(self):
        return self.W1.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TwoLayerNet):
            return NotImplemented
        return (self.W1.shape == other.W1.shape and np.array_equal(self.W1, other.W1)
                and np.array_equal(self.b1, other.b1) and np.array_equal(self.w2, other.w2)
                and self.b2 == other.b2)

    def hidden(self, X):
        X = _check_inputs(X, self.n_features)
        return np.maximum(X @ self.W1.T + self.b1, 0.0)

    def to_dict(self):
        return {"W1": self.W1.tolist(), "b1": self.b1.tolist(),
                "w2": self.w2.tolist(), "b2": self.b2}

    @classmethod
    def from_dict(cls, data):
        missing = [k for k in ("W1", "b1", "w2", "b2") if k not in data]
        if missing:
            raise KeyError(f"model is missing field(s): {', '.join(missing)}")
        W1 = np.asarray(data["W1"], dtype=float)
        if W1.ndim != 2:
            W1 = W1.reshape(len(data["b1"]), -1)
        return cls(W1, data["b1"], data["w2"], data["b2"])


def _check_inputs(X, d):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size == d else X.reshape(-1, 1)
    if X.shape[1] != d:
        raise DimensionError(f"inputs have {X.shape[1]} features, network expects {d}")
    return X


def preactivation(net: TwoLayerNet, x):
    """Output before the sigmoid. Scalar for one input, array for a batch."""
    single = np.ndim(x) <= 1 and np.size(x) == net.n_features
    vals = net.hidden(x) @ net.w2 + net.b2
    return float(vals[0]) if single else vals


@dataclass(frozen=True, eq=False)
class TropicalPart:
    """``x -> sum_i scales_i * max(weights_i . x + biases_i, 0)`` with ``scales >= 0``.

    ``neurons`` records the hidden-unit index each row came from.
    """

    scales: np.ndarray
    weights: np.ndarray
    biases: np.ndarray
    neurons: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=float).ravel()
        W = np.asarray(self.weights, dtype=float)
        if W.ndim == 1:
            W = W.reshape(len(s), -1) if len(s) else W.reshape(0, 0)
        b = np.asarray(self.biases, dtype=float).ravel()
        if np.any(s < 0):
            raise ValueError("part scales must be non-negative")
        if not (len(s) == len(W) == len(b)):
            raise DimensionError("scales, weights and biases disagree in length")
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)
        if not self.neurons:
            object.__setattr__(self, "neurons", tuple(range(len(s))))

    @property
    def n_units(self):
        return len(self.scales)

    @property
    def extended_rows(self):
        """Scaled generators ``scales_i * (weights_i, biases_i)``."""
        return self.scales[:, None] * np.hstack([self.weights, self.biases[:, None]])

    def __call__(self, X):
        return part_value(self, X)

    def without(self, i):
        keep = [k for k in range(self.n_units) if k != i]
        return TropicalPart(self.scales[keep], self.weights[keep], self.biases[keep],
                            tuple(self.neurons[k] for k in keep))

    def segment(self, i) -> TropicalPolynomial:
        """The two-term polynomial ``max(s_i (w_i . x + b_i), 0)`` of unit ``i``."""
        g = self.extended_rows[i]
        d = self.weights.shape[1]
        return TropicalPolynomial(np.vstack([g[:d], np.zeros(d)]), [g[d], 0.0], d)


def part_value(part: TropicalPart, X):
    X = np.asarray(X, dtype=float)
    d = part.weights.shape[1]
    single = X.ndim == 0 or (X.ndim == 1 and X.size == d)
    if part.n_units == 0:
        n = 1 if single else (X.size if X.ndim == 1 else len(X))
        out = np.zeros(n)
    else:
        X2 = _check_inputs(X, part.weights.shape[1])
        out = np.maximum(X2 @ part.weights.T + part.biases, 0.0) @ part.scales
    return float(out[0]) if single else out


def decompose(net: TwoLayerNet):
    """Split by the sign of the output weights; returns ``(p_plus, p_minus, b2)``.

    Units with zero output weight belong to neither part.
    """
    pos = np.flatnonzero(net.w2 > 0)
    neg = np.flatnonzero(net.w2 < 0)
    p_plus = TropicalPart(net.w2[pos], net.W1[pos], net.b1[pos], tuple(pos.tolist()))
    p_minus = TropicalPart(-net.w2[neg], net.W1[neg], net.b1[neg], tuple(neg.tolist()))
    if not len(pos):
        p_plus = TropicalPart(np.zeros(0), np.zeros((0, net.n_features)), np.zeros(0))
    if not len(neg):
        p_minus = TropicalPart(np.zeros(0), np.zeros((0, net.n_features)), np.zeros(0))
    return p_plus, p_minus, net.b2


@dataclass(frozen=True)
class ActivatedVertex:
    """Vertex of ``ENewt`` attaining the max at some input.

    ``pattern`` is the packed bit mask of firing units; ``extended`` is the
    sum of the firing units' scaled ``(weights, bias)`` rows.
    """

    pattern: bytes
    extended: np.ndarray

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.extended[:-1] + self.extended[-1])


def activation_patterns(part: TropicalPart, X):
    """Boolean firing matrix (strictly positive pre-activation)."""
    X = _check_inputs(X, part.weights.shape[1])
    return (X @ part.weights.T + part.biases) > 0


def pack_pattern(mask_row):
    return np.packbits(np.asarray(mask_row, dtype=bool)).tobytes()


def activated_vertex(part: TropicalPart, x) -> ActivatedVertex:
    x = np.asarray(x, dtype=float).ravel()
    if part.n_units == 0:
        return ActivatedVertex(b"", np.zeros(x.size + 1))
    mask = activation_patterns(part, x[None, :])[0]
    ext = mask.astype(float) @ part.extended_rows
    return ActivatedVertex(pack_pattern(mask), ext)


def part_to_polynomial(part: TropicalPart, max_units=14) -> TropicalPolynomial:
    """Explicit zonotope expansion: one term per firing subset.

    Exponential in the number of units, so restricted to small parts.
    """
    if part.n_units > max_units:
        raise ValueError(f"refusing to expand {part.n_units} units (limit {max_units})")
    d = part.weights.shape[1]
    gens = part.extended_rows
    subsets = np.array(list(itertools.product((0.0, 1.0), repeat=part.n_units))).reshape(-1, part.n_units)
    pts = subsets @ gens if part.n_units else np.zeros((1, d + 1))
    return TropicalPolynomial(pts[:, :d], pts[:, d], d)


def check_divisibility(part: TropicalPart, i: int, samples: int = 1000, rng=None,
                       divisor: TropicalPolynomial | None = None, atol=1e-9, scale=5.0) -> bool:
    """Test ``part == (part without unit i) + segment_i`` on random inputs.

    ``divisor`` replaces the segment, which is how non-constituent divisors
    are shown to fail.
    """
    if not 0 <= i < part.n_units:
        raise IndexError(f"unit {i} out of range for a part of {part.n_units} units")
    if part.scales[i] <= 0:
        raise ValueError(f"unit {i} has zero scale")
    d = part.weights.shape[1]
    rng = np.random.default_rng(rng)
    X = rng.uniform(-scale, scale, size=(samples, d))
    seg = part.segment(i) if divisor is None else divisor
    quotient = part.without(i)
    lhs = part_value(part, X)
    rhs = part_value(quotient, X) + evaluate(seg, X)
    return bool(np.allclose(lhs, rhs, rtol=0, atol=atol))


def part_generators(part: TropicalPart):
    return zonotope_generators(part.weights, part.biases, part.scales)
