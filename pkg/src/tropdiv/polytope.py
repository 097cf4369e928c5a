"""Newton polytope geometry backed by a small dense simplex solver.

Hull heights, membership and vertex tests are all posed as tiny linear
programs over convex-combination weights, which keeps every query
dimension-agnostic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import LP_RESIDUAL_TOL, LP_TOL
from .exceptions import DimensionError, LPNumericalError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPProblem:
    """``max (or min) c @ x`` s.t. ``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``x >= 0``."""

    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    maximize: bool = True


@dataclass(frozen=True)
class LPSolution:
    status: str
    x: np.ndarray | None = None
    value: float | None = None
    residual: float = 0.0
    iterations: int = 0


def _pivot(T, row, col):
    T[row] /= T[row, col]
    pivot_row = T[row]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * pivot_row


def _simplex(T, basis, n_cols, max_iter):
    """Minimise the objective held in the last row of tableau ``T`` (Bland's rule).

    Only the first ``n_cols`` columns may enter. Returns ``"optimal"`` or
    ``"unbounded"`` and the pivot count.
    """
    m = T.shape[0] - 1
    for it in range(max_iter):
        reduced = T[-1, :n_cols]
        candidates = np.flatnonzero(reduced < -LP_TOL)
        if candidates.size == 0:
            return OPTIMAL, it
        col = candidates[0]
        column = T[:m, col]
        positive = column > LP_TOL
        if not positive.any():
            return UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[positive] = T[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + LP_TOL * max(1.0, abs(best)))
        row = min(ties, key=lambda r: basis[r])
        _pivot(T, row, col)
        basis[row] = col
    raise LPNumericalError(f"simplex did not terminate within {max_iter} pivots")


def lp_solve(problem: LPProblem, max_iter: int | None = None) -> LPSolution:
    """Two-phase dense tableau simplex with Bland's anti-cycling rule.

    The final basic solution is recomputed from the original constraint
    columns so that the reported ``x`` does not carry tableau round-off.
    """
    c = np.asarray(problem.c, dtype=float)
    n = c.size
    blocks, rhs = [], []
    n_ub = 0
    if problem.A_ub is not None and len(problem.A_ub):
        A_ub = np.atleast_2d(np.asarray(problem.A_ub, dtype=float))
        n_ub = A_ub.shape[0]
        blocks.append(np.hstack([A_ub, np.eye(n_ub)]))
        rhs.append(np.asarray(problem.b_ub, dtype=float))
    if problem.A_eq is not None and len(problem.A_eq):
        A_eq = np.atleast_2d(np.asarray(problem.A_eq, dtype=float))
        blocks.append(np.hstack([A_eq, np.zeros((A_eq.shape[0], n_ub))]))
        rhs.append(np.asarray(problem.b_eq, dtype=float))
    if not blocks:
        if np.any(c != 0):
            return LPSolution(UNBOUNDED)
        return LPSolution(OPTIMAL, np.zeros(n), 0.0)
    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    if A.shape[1] != n + n_ub:
        raise DimensionError("constraint matrix width does not match objective length")
    m, n_std = A.shape
    cost = np.concatenate([-c if problem.maximize else c, np.zeros(n_ub)])

    sign = np.where(b < 0, -1.0, 1.0)
    A_s, b_s = A * sign[:, None], b * sign
    if max_iter is None:
        max_iter = 50 * (m + n_std) + 100

    # phase 1: artificial identity columns after the structural ones
    T = np.zeros((m + 1, n_std + m + 1))
    T[:m, :n_std] = A_s
    T[:m, n_std:n_std + m] = np.eye(m)
    T[:m, -1] = b_s
    T[-1, :n_std] = -A_s.sum(axis=0)
    T[-1, -1] = -b_s.sum()
    basis = list(range(n_std, n_std + m))
    _, it1 = _simplex(T, basis, n_std, max_iter)
    if -T[-1, -1] > LP_RESIDUAL_TOL * max(1.0, np.abs(b_s).max()):
        return LPSolution(INFEASIBLE, iterations=it1)

    # drive remaining artificials out, dropping redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n_std:
            entries = np.flatnonzero(np.abs(T[r, :n_std]) > LP_TOL)
            if entries.size == 0:
                continue
            _pivot(T, r, entries[0])
            basis[r] = entries[0]
        keep.append(r)
    T = np.vstack([T[keep][:, list(range(n_std)) + [T.shape[1] - 1]], np.zeros(n_std + 1)])
    basis = [basis[r] for r in keep]
    A_s, b_s = A_s[keep], b_s[keep]

    # phase 2
    T[-1, :n_std] = cost
    T[-1, -1] = 0.0
    for r, bcol in enumerate(basis):
        if T[-1, bcol] != 0.0:
            T[-1] -= T[-1, bcol] * T[r]
    status, it2 = _simplex(T, basis, n_std, max_iter)
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, iterations=it1 + it2)

    x_std = np.zeros(n_std)
    if basis:
        B = A_s[:, basis]
        try:
            x_std[basis] = np.linalg.solve(B, b_s)
        except np.linalg.LinAlgError:
            x_std[basis] = T[:-1, -1]
    x_std = np.where(np.abs(x_std) < 1e-14, 0.0, x_std)
    residual = float(np.abs(A @ x_std - b).max(initial=0.0))
    if residual > LP_RESIDUAL_TOL or x_std.min(initial=0.0) < -LP_RESIDUAL_TOL:
        raise LPNumericalError(f"basic solution violates constraints (residual {residual:.3g})")
    x = x_std[:n]
    return LPSolution(OPTIMAL, x, float(c @ x), residual, it1 + it2)


def _as_points(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("need at least one point")
    return pts


def upper_hull_height(degrees, heights, j):
    """Height of the upper hull of ``{(degrees[k], heights[k])}`` above ``j``.

    Returns ``None`` when ``j`` lies outside the convex hull of ``degrees``.
    """
    pts = _as_points(degrees)
    j = np.asarray(j, dtype=float).ravel()
    if j.size != pts.shape[1]:
        raise DimensionError(f"query has length {j.size}, points have dimension {pts.shape[1]}")
    A_eq = np.vstack([pts.T, np.ones(len(pts))])
    b_eq = np.append(j, 1.0)
    sol = lp_solve(LPProblem(np.asarray(heights, dtype=float), A_eq, b_eq))
    if sol.status == INFEASIBLE:
        return None
    return sol.value


def in_hull(points, j):
    pts = _as_points(points)
    j = np.asarray(j, dtype=float).ravel()
    if j.size != pts.shape[1]:
        raise DimensionError(f"query has length {j.size}, points have dimension {pts.shape[1]}")
    A_eq = np.vstack([pts.T, np.ones(len(pts))])
    sol = lp_solve(LPProblem(np.zeros(len(pts)), A_eq, np.append(j, 1.0)))
    return sol.status == OPTIMAL


def upper_hull_vertices(degrees, heights, tol=1e-9):
    """Boolean mask of the points that are vertices of the upper hull.

    A point is a vertex when it sits on the upper hull and the hull of the
    remaining points either misses its degree or passes strictly below it.
    Degrees are assumed distinct.
    """
    pts = _as_points(degrees)
    h = np.asarray(heights, dtype=float)
    mask = np.zeros(len(pts), dtype=bool)
    if len(pts) == 1:
        mask[0] = True
        return mask
    for k in range(len(pts)):
        top = upper_hull_height(pts, h, pts[k])
        if h[k] < top - tol:
            continue
        others = np.delete(np.arange(len(pts)), k)
        rest = upper_hull_height(pts[others], h[others], pts[k])
        mask[k] = rest is None or rest < h[k] - tol
    return mask


def _integer_box(lo, hi):
    ranges = [range(int(a), int(b) + 1) for a, b in zip(lo, hi)]
    return itertools.product(*ranges)


@dataclass(frozen=True, eq=False)
class NewtonPolytope:
    """Convex hull of a finite set of degree vectors."""

    points: np.ndarray
    _membership: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        pts = _as_points(self.points)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]

    def contains(self, j):
        key = tuple(np.asarray(j, dtype=float).ravel())
        if key not in self._membership:
            self._membership[key] = in_hull(self.points, key)
        return self._membership[key]

    @cached_property
    def lattice_points(self):
        """All integer points of the closed polytope, in lexicographic order."""
        lo = np.ceil(self.points.min(axis=0) - 1e-9)
        hi = np.floor(self.points.max(axis=0) + 1e-9)
        return tuple(j for j in _integer_box(lo, hi) if self.contains(j))


def contains(poly: NewtonPolytope, j) -> bool:
    """Closed-hull membership of ``j`` in ``poly``."""
    j = np.asarray(j, dtype=float).ravel()
    if j.size != poly.dim:
        raise DimensionError(f"query has length {j.size}, polytope dimension is {poly.dim}")
    return poly.contains(j)


def valid_shifts(d_poly: NewtonPolytope, p_poly: NewtonPolytope):
    """Integer translations ``c`` with ``c + Newt(d)`` inside ``Newt(p)``.

    Only the generating points of ``d_poly`` are tested; containment of the
    generators is containment of their hull. Returns a sorted list of tuples.
    """
    if d_poly.dim != p_poly.dim:
        raise DimensionError(f"divisor dimension {d_poly.dim} != dividend dimension {p_poly.dim}")
    d_pts = np.unique(d_poly.points, axis=0)
    lo = np.ceil(p_poly.points.min(axis=0) - d_pts.min(axis=0) - 1e-9)
    hi = np.floor(p_poly.points.max(axis=0) - d_pts.max(axis=0) + 1e-9)
    if np.any(lo > hi):
        return []
    shifts = []
    for c in _integer_box(lo, hi):
        if all(p_poly.contains(tuple(np.asarray(c) + v)) for v in d_pts):
            shifts.append(tuple(int(ci) for ci in c))
    return shifts


def zonotope_generators(weights, biases, scales):
    """Scaled extended segments ``scales[k] * (weights[k], biases[k])``.

    Zero-scale generators are dropped. Returns an array of shape
    ``(n_kept, dim + 1)``; the zonotope is the Minkowski sum of the
    segments from the origin to each row.
    """
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    b = np.asarray(biases, dtype=float).ravel()
    s = np.asarray(scales, dtype=float).ravel()
    if np.any(s < 0):
        raise ValueError("zonotope scales must be non-negative")
    if not (len(W) == len(b) == len(s)):
        raise DimensionError("weights, biases and scales disagree in length")
    gens = s[:, None] * np.hstack([W, b[:, None]])
    return gens[s > 0]


def hull_to_json(degrees, heights):
    """Debug dump of an extended point set and its upper-hull vertex flags."""
    pts = _as_points(degrees)
    h = np.asarray(heights, dtype=float)
    mask = upper_hull_vertices(pts, h)
    return {
        "points": [{"a": list(map(float, p)), "b": float(v), "vertex": bool(m)}
                   for p, v, m in zip(pts, h, mask)]
    }
