"""Max-plus polynomials: evaluation, tropical sum/product, convolution.

A :class:`TropicalPolynomial` is the function ``x -> max_i (a_i . x + b_i)``.
Tropical addition is the pointwise max of two polynomials and tropical
multiplication is their ordinary sum. :class:`LatticePolynomial` is the
canonical integer-degree form used by division: one coefficient for every
lattice point of the Newton polytope, each sitting on the upper hull.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from . import config
from .exceptions import BottomPolynomialError, DimensionError, LatticeError
from .polytope import NewtonPolytope, upper_hull_height


class Term(NamedTuple):
    degree: tuple
    coeff: float


def _collapse(degrees, coeffs):
    """Merge duplicate degree rows, keeping the largest coefficient."""
    if len(degrees) == 0:
        return degrees, coeffs
    uniq, inverse = np.unique(degrees, axis=0, return_inverse=True)
    best = np.full(len(uniq), -np.inf)
    np.maximum.at(best, inverse.ravel(), coeffs)
    return uniq, best


class TropicalPolynomial:
    """Finite max of affine terms; immutable.

    Parameters
    ----------
    degrees : array_like, shape (k, dim)
    coeffs : array_like, shape (k,)
    dim : int, optional
        Required only for the bottom (term-free) polynomial.
    """

    __slots__ = ("_degrees", "_coeffs", "_dim")

    def __init__(self, degrees, coeffs, dim=None):
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        if len(coeffs) == 0:
            if dim is None:
                dim = np.asarray(degrees).shape[-1] if np.ndim(degrees) == 2 else None
            if dim is None or dim < 1:
                raise DimensionError("bottom polynomial needs an explicit positive dim")
            degrees = np.zeros((0, dim))
        else:
            degrees = np.asarray(degrees, dtype=float)
            if degrees.ndim == 1:
                degrees = degrees[:, None]
            if degrees.shape[0] != len(coeffs):
                raise DimensionError(f"{degrees.shape[0]} degree rows for {len(coeffs)} coefficients")
            if dim is not None and degrees.shape[1] != dim:
                raise DimensionError(f"degrees have length {degrees.shape[1]}, expected {dim}")
            if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(degrees))):
                raise ValueError("degrees and coefficients must be finite")
            degrees, coeffs = _collapse(degrees, coeffs)
        degrees.setflags(write=False)
        coeffs.setflags(write=False)
        self._degrees, self._coeffs, self._dim = degrees, coeffs, degrees.shape[1]

    @classmethod
    def from_terms(cls, terms: Iterable, dim=None):
        terms = [(np.atleast_1d(np.asarray(a, dtype=float)), float(b)) for a, b in terms]
        if not terms:
            return cls.bottom(dim)
        return cls(np.vstack([a for a, _ in terms]), [b for _, b in terms], dim)

    @classmethod
    def bottom(cls, dim):
        return cls(np.zeros((0, dim)), [], dim)

    @property
    def dim(self):
        return self._dim

    @property
    def degrees(self):
        return self._degrees

    @property
    def coeffs(self):
        return self._coeffs

    @property
    def terms(self):
        return [Term(tuple(a), float(b)) for a, b in zip(self._degrees, self._coeffs)]

    @property
    def is_bottom(self):
        return len(self._coeffs) == 0

    def __len__(self):
        return len(self._coeffs)

    def __call__(self, x):
        return evaluate(self, x)

    def __repr__(self):
        body = ", ".join(f"{list(a)}:{b:g}" for a, b in zip(self._degrees.tolist(), self._coeffs))
        return f"TropicalPolynomial(dim={self._dim}, {{{body}}})"

    def __eq__(self, other):
        if not isinstance(other, TropicalPolynomial):
            return NotImplemented
        return (self._dim == other._dim
                and self._degrees.shape == other._degrees.shape
                and np.array_equal(self._degrees, other._degrees)
                and np.array_equal(self._coeffs, other._coeffs))

    def __hash__(self):
        return hash((self._dim, self._degrees.tobytes(), self._coeffs.tobytes()))

    def allclose(self, other, atol=None):
        atol = config.atol() if atol is None else atol
        return (self._dim == other._dim
                and self._degrees.shape == other._degrees.shape
                and np.array_equal(self._degrees, other._degrees)
                and np.allclose(self._coeffs, other._coeffs, rtol=0, atol=atol))

    def newton_polytope(self):
        if self.is_bottom:
            raise BottomPolynomialError("the bottom polynomial has no Newton polytope")
        return NewtonPolytope(self._degrees)

    def lattice_degrees(self):
        """Degrees rounded to integers; raises :class:`LatticeError` otherwise."""
        rounded = np.round(self._degrees)
        if np.any(np.abs(self._degrees - rounded) > config.atol()):
            raise LatticeError("polynomial has non-integer degrees")
        return rounded.astype(np.int64)


def _check_same_dim(p, q):
    if p.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {p.dim} vs {q.dim}")


def evaluate(p: TropicalPolynomial, x):
    """``max_i (a_i . x + b_i)`` at one point (shape ``(dim,)``) or many (``(n, dim)``)."""
    if p.is_bottom:
        raise BottomPolynomialError("cannot evaluate the bottom polynomial")
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        single, X = True, x.reshape(1, 1)
    elif x.ndim == 1 and p.dim == 1 and x.size != 1:
        # a flat array of scalars for a univariate polynomial
        single, X = False, x[:, None]
    elif x.ndim == 1:
        single, X = True, x[None, :]
    else:
        single, X = False, x
    if X.shape[-1] != p.dim:
        raise DimensionError(f"point has length {X.shape[-1]}, polynomial dimension is {p.dim}")
    vals = (X @ p.degrees.T + p.coeffs).max(axis=1)
    return float(vals[0]) if single else vals


def tropical_sum(p: TropicalPolynomial, q: TropicalPolynomial) -> TropicalPolynomial:
    _check_same_dim(p, q)
    return TropicalPolynomial(np.vstack([p.degrees, q.degrees]),
                              np.concatenate([p.coeffs, q.coeffs]), p.dim)


def tropical_product(p: TropicalPolynomial, q: TropicalPolynomial) -> TropicalPolynomial:
    """All pairwise term sums, duplicates collapsed by max."""
    _check_same_dim(p, q)
    if p.is_bottom or q.is_bottom:
        return TropicalPolynomial.bottom(p.dim)
    degrees = (p.degrees[:, None, :] + q.degrees[None, :, :]).reshape(-1, p.dim)
    coeffs = (p.coeffs[:, None] + q.coeffs[None, :]).ravel()
    return TropicalPolynomial(degrees, coeffs, p.dim)


class LatticePolynomial:
    """Coefficient map over integer degree vectors.

    ``coeffs`` maps ``tuple[int, ...]`` to float. An empty map is the bottom
    element. Instances are treated as immutable.
    """

    __slots__ = ("dim", "coeffs")

    def __init__(self, dim, coeffs=None):
        self.dim = int(dim)
        items = {}
        for key, value in (coeffs or {}).items():
            key = tuple(int(k) for k in np.atleast_1d(key))
            if len(key) != self.dim:
                raise DimensionError(f"key {key} does not have length {self.dim}")
            value = float(value)
            if not np.isfinite(value):
                raise ValueError(f"coefficient at {key} is not finite")
            items[key] = value
        self.coeffs = dict(sorted(items.items()))

    def __getitem__(self, key):
        return self.coeffs[tuple(np.atleast_1d(key).tolist())]

    def __contains__(self, key):
        return tuple(np.atleast_1d(key).tolist()) in self.coeffs

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def keys(self):
        return self.coeffs.keys()

    def items(self):
        return self.coeffs.items()

    def __repr__(self):
        return f"LatticePolynomial(dim={self.dim}, {self.coeffs})"

    def __eq__(self, other):
        if not isinstance(other, LatticePolynomial):
            return NotImplemented
        return self.dim == other.dim and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.dim, tuple(self.coeffs.items())))

    def allclose(self, other, atol=None):
        atol = config.atol() if atol is None else atol
        if self.dim != other.dim or self.coeffs.keys() != other.coeffs.keys():
            return False
        return all(abs(v - other.coeffs[k]) <= atol for k, v in self.coeffs.items())

    def to_polynomial(self) -> TropicalPolynomial:
        if not self.coeffs:
            return TropicalPolynomial.bottom(self.dim)
        return TropicalPolynomial(np.array(list(self.coeffs), dtype=float),
                                  list(self.coeffs.values()), self.dim)

    def __call__(self, x):
        return evaluate(self.to_polynomial(), x)


def maxplus_convolution(q: LatticePolynomial, d: LatticePolynomial) -> LatticePolynomial:
    """``(q (+) d)_j = max_{c + i = j} (q_c + d_i)``, keyed on the Minkowski sum."""
    if q.dim != d.dim:
        raise DimensionError(f"dimension mismatch: {q.dim} vs {d.dim}")
    out = {}
    for c, qc in q.items():
        for i, di in d.items():
            j = tuple(a + b for a, b in zip(c, i))
            v = qc + di
            if j not in out or v > out[j]:
                out[j] = v
    return LatticePolynomial(q.dim, out)


def canonicalize(p: TropicalPolynomial) -> LatticePolynomial:
    """Fill every lattice point of ``Newt(p)`` with its upper-hull height.

    Terms strictly below the hull are raised to it; the represented function
    does not change. Results are memoized per polynomial; treat them as
    read-only.
    """
    return _canonicalize(p)


@lru_cache(maxsize=512)
def _canonicalize(p: TropicalPolynomial) -> LatticePolynomial:
    if p.is_bottom:
        return LatticePolynomial(p.dim)
    degrees = p.lattice_degrees().astype(float)
    poly = NewtonPolytope(degrees)
    out = {}
    for j in poly.lattice_points:
        h = upper_hull_height(degrees, p.coeffs, j)
        if h is None:  # pragma: no cover - lattice_points are inside by construction
            continue
        out[j] = h
    return LatticePolynomial(p.dim, out)


def as_lattice(p) -> LatticePolynomial:
    """Canonical lattice form of either polynomial type."""
    if isinstance(p, LatticePolynomial):
        return canonicalize(p.to_polynomial())
    return canonicalize(p)
