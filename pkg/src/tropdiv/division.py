"""Tropical polynomial division.

For every integer shift ``c`` that keeps ``c + Newt(d)`` inside ``Newt(p)``,
the quotient coefficient is the largest ``q_c`` with
``p(x) >= q_c + c.x + d(x)`` everywhere. On canonical lattice forms this is
a grayscale erosion of the hull height of ``p`` by that of ``d``::

    q_c = min_{i in deg(d)} (n_p(c + i) - n_d(i))

and ``q (+) d`` is the corresponding dilation, i.e. the morphological
opening of ``n_p`` by ``n_d``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import config
from .exceptions import DimensionError
from .polytope import NewtonPolytope, upper_hull_vertices, valid_shifts
from .tropical import (LatticePolynomial, TropicalPolynomial, as_lattice,
                       evaluate, maxplus_convolution)


@dataclass(frozen=True)
class DivisionResult:
    quotient: LatticePolynomial
    remainder: TropicalPolynomial
    exact: bool
    tight_witnesses: dict = field(default_factory=dict)
    shifts: tuple = ()

    @property
    def dim(self):
        return self.quotient.dim


def _shift(c, i):
    return tuple(a + b for a, b in zip(c, i))


def erode_at(P: LatticePolynomial, D: LatticePolynomial, c):
    """Quotient coefficient for shift ``c`` and the degree where it is tight."""
    best, witness = np.inf, None
    for i, di in D.items():
        j = _shift(c, i)
        v = P.coeffs[j] - di
        if v < best:
            best, witness = v, j
    return best, witness


def hull_vertex_terms(P: LatticePolynomial):
    """Degrees of ``P`` that are vertices of the upper hull of ``ENewt(P)``."""
    keys = list(P.keys())
    if not keys:
        return []
    mask = upper_hull_vertices(np.array(keys, dtype=float), np.array(list(P.coeffs.values())))
    return [k for k, m in zip(keys, mask) if m]


def _as_input(p):
    if isinstance(p, LatticePolynomial):
        return p.to_polynomial()
    return p


def divide(p, d, workers: int = 1, shift_order=None) -> DivisionResult:
    """Divide ``p`` by ``d``.

    Parameters
    ----------
    p, d : TropicalPolynomial or LatticePolynomial
        Integer-degree polynomials of equal dimension.
    workers : int
        Thread count for evaluating the per-shift erosions. The result does
        not depend on it.
    shift_order : callable, optional
        Permutes the list of valid shifts before evaluation (used to check
        order independence).
    """
    p, d = _as_input(p), _as_input(d)
    if p.dim != d.dim:
        raise DimensionError(f"dividend dimension {p.dim} != divisor dimension {d.dim}")
    P, D = as_lattice(p), as_lattice(d)
    if not P or not D:
        raise ValueError("dividend and divisor must be non-empty")
    return _divide_lattice(P, D, _dividend_geometry(P), workers, shift_order)


@lru_cache(maxsize=128)
def _dividend_geometry(P: LatticePolynomial):
    return _DividendGeometry(P)


class _DividendGeometry:
    """Newton polytope and hull-vertex degrees of a canonical dividend."""

    def __init__(self, P: LatticePolynomial):
        self.newt = NewtonPolytope(np.array(list(P.keys()), dtype=float))
        self.vertices = hull_vertex_terms(P)


def _divide_lattice(P, D, geometry, workers=1, shift_order=None) -> DivisionResult:
    newt_p = geometry.newt
    shifts = valid_shifts(NewtonPolytope(np.array(list(D.keys()), dtype=float)), newt_p)
    order = list(shifts) if shift_order is None else list(shift_order(list(shifts)))

    if workers > 1 and len(order) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda c: erode_at(P, D, c), order))
    else:
        values = [erode_at(P, D, c) for c in order]
    quotient = LatticePolynomial(P.dim, {c: v for c, (v, _) in zip(order, values)})
    witnesses = {c: w for c, (_, w) in sorted(zip(order, values))}

    covered = {_shift(c, i) for c in shifts for i in D.keys()}
    vertices = geometry.vertices
    remainder_keys = [j for j in vertices if j not in covered]
    remainder = LatticePolynomial(P.dim, {j: P.coeffs[j] for j in remainder_keys}).to_polynomial()

    if shifts:
        product = maxplus_convolution(quotient, D)
        tol = config.atol()
        exact = all(j in product.coeffs and abs(product.coeffs[j] - P.coeffs[j]) <= tol
                    for j in vertices)
    else:
        exact = False
    return DivisionResult(quotient, remainder, exact, witnesses, tuple(shifts))


def divide_multi(p, divisors, workers: int = 1):
    """Divide by several polynomials at once.

    Each divisor is handled independently; the remainder keeps the terms
    present in every per-divisor remainder, so the divisor order is
    irrelevant. Returns ``(results, remainder)``.
    """
    divisors = list(divisors)
    if not divisors:
        raise ValueError("need at least one divisor")
    p = _as_input(p)
    for d in divisors:
        if _as_input(d).dim != p.dim:
            raise DimensionError(f"dividend dimension {p.dim} != divisor dimension {_as_input(d).dim}")
    P = as_lattice(p)
    if not P:
        raise ValueError("dividend must be non-empty")
    geometry = _dividend_geometry(P)
    results = []
    for d in divisors:
        D = as_lattice(_as_input(d))
        if not D:
            raise ValueError("divisor must be non-empty")
        results.append(_divide_lattice(P, D, geometry, workers))
    common = None
    for res in results:
        terms = {tuple(a): b for a, b in zip(res.remainder.degrees.tolist(), res.remainder.coeffs)}
        common = terms if common is None else {k: v for k, v in common.items() if k in terms}
    dim = results[0].dim
    if not common:
        remainder = TropicalPolynomial.bottom(dim)
    else:
        remainder = TropicalPolynomial(np.array(sorted(common), dtype=float),
                                       [common[k] for k in sorted(common)], dim)
    return results, remainder


def erosion(P: LatticePolynomial, D: LatticePolynomial):
    """Brute-force grayscale erosion of ``n_p`` by ``n_d`` over a lattice box.

    Points where some ``x + i`` leaves the support of ``P`` erode to minus
    infinity and are omitted from the returned map.
    """
    if P.dim != D.dim:
        raise DimensionError(f"dimension mismatch: {P.dim} vs {D.dim}")
    if not P or not D:
        return {}
    pk = np.array(list(P.keys()))
    dk = np.array(list(D.keys()))
    lo = pk.min(axis=0) - dk.max(axis=0)
    hi = pk.max(axis=0) - dk.min(axis=0)
    out = {}
    for x in np.ndindex(*(hi - lo + 1)):
        x = tuple(int(a) for a in np.asarray(x) + lo)
        vals = []
        for i, di in D.items():
            j = _shift(x, i)
            if j not in P.coeffs:
                break
            vals.append(P.coeffs[j] - di)
        else:
            out[x] = min(vals)
    return out


def opening_oracle(P: LatticePolynomial, D: LatticePolynomial) -> LatticePolynomial:
    """Morphological opening (erosion then dilation) of ``n_p`` by ``n_d``."""
    eroded = erosion(P, D)
    out = {}
    for x, e in eroded.items():
        for i, di in D.items():
            j = _shift(x, i)
            v = e + di
            if j not in out or v > out[j]:
                out[j] = v
    return LatticePolynomial(P.dim, out)


def sample_points(dim, samples, rng, scale=5.0):
    return rng.uniform(-scale, scale, size=(samples, dim))


def verify_inequality(p, q, d, r, samples: int = 1000, rng=None, points=None) -> bool:
    """Check ``p(x) >= max(q(x) + d(x), r(x))`` on random (or given) points.

    Bottom polynomials for ``q`` or ``r`` are skipped.
    """
    p, q, d, r = (_as_input(v) for v in (p, q, d, r))
    if points is None:
        rng = np.random.default_rng(rng)
        points = sample_points(p.dim, samples, rng)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lhs = evaluate(p, points)
    rhs = np.full(len(points), -np.inf)
    if not q.is_bottom:
        rhs = np.maximum(rhs, evaluate(q, points) + evaluate(d, points))
    if not r.is_bottom:
        rhs = np.maximum(rhs, evaluate(r, points))
    return bool(np.all(lhs >= rhs - config.atol()))


def pointwise_gap(p, q, d, points):
    """``p(x) - (q(x) + d(x))`` at each of ``points``."""
    p, q, d = (_as_input(v) for v in (p, q, d))
    return evaluate(p, points) - (evaluate(q, points) + evaluate(d, points))
