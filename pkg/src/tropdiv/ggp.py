"""Geometric-programming views of tropical division.

Coefficients are first shifted so every quantity in the program is
positive. Two programs are provided:

* the division GGP, whose optimum reproduces the erosion quotient exactly.
  Its generalized-posynomial constraint ``max_c (q_c + d_{j-c}) <= p_j`` is
  split into one posynomial row per ``(c, i)`` pair and handed to the
  cvxopt GP solver;
* the relaxed direct approximation, with slack factors ``xi_j`` and a
  regularization weight ``R``, solved by first-order descent in log
  variables on a smooth-max surrogate.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .division import erode_at
from .exceptions import DimensionError, SolverError
from .polytope import NewtonPolytope, valid_shifts
from .tropical import LatticePolynomial, as_lattice, maxplus_convolution

log = logging.getLogger(__name__)


def positivity_shift(p: LatticePolynomial):
    """Shift all coefficients so the smallest one is at least 1.

    Returns ``(shifted, shift)`` with ``shift = max(0, 1 - min coeff)``.
    """
    if not p.coeffs:
        return p, 0.0
    shift = max(0.0, 1.0 - min(p.coeffs.values()))
    return LatticePolynomial(p.dim, {k: v + shift for k, v in p.items()}), shift


@dataclass(frozen=True)
class GGPDivisionProblem:
    """Division of ``p`` by ``d`` posed over positive (shifted) coefficients.

    ``d`` is lifted to be >= 1 and ``p`` is then lifted far enough that
    ``p_j - d_i >= 1`` for every pair, so every feasible quotient
    coefficient can be positive. Quotients convert back to the original
    coordinates by subtracting ``p_shift - d_shift``.
    """

    p: LatticePolynomial
    d: LatticePolynomial
    shifts: tuple
    p_shift: float
    d_shift: float

    @classmethod
    def from_polynomials(cls, p, d):
        P, D = as_lattice(p), as_lattice(d)
        if P.dim != D.dim:
            raise DimensionError(f"dimension mismatch: {P.dim} vs {D.dim}")
        shifts = valid_shifts(NewtonPolytope(np.array(list(D.keys()), dtype=float)),
                              NewtonPolytope(np.array(list(P.keys()), dtype=float)))
        if not shifts:
            raise ValueError("no valid shift: the divisor polytope does not fit in the dividend's")
        D_pos, d_shift = positivity_shift(D)
        _, p_base = positivity_shift(P)
        p_shift = max(p_base, 1.0 + max(D_pos.coeffs.values()) - min(P.coeffs.values()))
        P_pos = LatticePolynomial(P.dim, {k: v + p_shift for k, v in P.items()})
        return cls(P_pos, D_pos, tuple(shifts), p_shift, d_shift)

    @property
    def offset(self):
        return self.p_shift - self.d_shift

    def pairs(self):
        """``(c index, divisor degree, product degree)`` for every shifted term."""
        out = []
        for k, c in enumerate(self.shifts):
            for i in self.d.keys():
                out.append((k, i, tuple(a + b for a, b in zip(c, i))))
        return out

    def posynomial_form(self):
        """``(K, F, g)`` in cvxopt's log-sum-exp GP convention.

        Variables are ``log q_c`` followed by ``log l_c``.
        """
        n = len(self.shifts)
        rows, g, K = [], [], [n]
        for k in range(n):  # objective: sum_c 1 / l_c
            r = np.zeros(2 * n)
            r[n + k] = -1.0
            rows.append(r)
            g.append(0.0)
        for k in range(n):  # l_c / q_c <= 1
            r = np.zeros(2 * n)
            r[n + k], r[k] = 1.0, -1.0
            rows.append(r)
            g.append(0.0)
            K.append(1)
        for k, i, j in self.pairs():  # q_c / p_j + d_i / p_j <= 1
            r = np.zeros(2 * n)
            r[k] = 1.0
            rows.append(r)
            g.append(-np.log(self.p.coeffs[j]))
            rows.append(np.zeros(2 * n))
            g.append(np.log(self.d.coeffs[i]) - np.log(self.p.coeffs[j]))
            K.append(2)
        return K, np.array(rows), np.array(g)


def solve_division_ggp(problem: GGPDivisionProblem, tol=1e-12) -> LatticePolynomial:
    """Solve the division GGP; returns quotient coefficients in original units."""
    from cvxopt import matrix, solvers

    K, F, g = problem.posynomial_form()
    options = {"show_progress": False, "abstol": tol, "reltol": tol,
               "feastol": tol, "maxiters": 200}
    sol = solvers.gp(K, matrix(F), matrix(g), options=options)
    if sol["status"] != "optimal":
        raise SolverError(f"GP solver finished with status {sol['status']!r}")
    x = np.exp(np.array(sol["x"]).ravel())
    return LatticePolynomial(problem.p.dim,
                             {c: x[k] - problem.offset for k, c in enumerate(problem.shifts)})


def eval_goal0(q: LatticePolynomial, p: LatticePolynomial, d: LatticePolynomial) -> float:
    """Squared coefficient mismatch ``sum_j ((q (+) d)_j - p_j)^2``.

    Degrees of ``p`` not reached by any shifted divisor term have no
    product coefficient and are left out of the sum.
    """
    P, D = as_lattice(p), as_lattice(d)
    prod = maxplus_convolution(q, D)
    return float(sum((prod.coeffs[j] - pj) ** 2 for j, pj in P.items() if j in prod.coeffs))


@dataclass(frozen=True)
class DirectApproxProblem:
    """Relaxed division with slack factors and regularization weight ``R``."""

    base: GGPDivisionProblem
    R: float = 1e3
    beta: float = 50.0
    beta_max: float = 50.0 * 2 ** 12
    max_iters: int = 4000
    iters_per_beta: int = 200
    grad_tol: float = 1e-9
    rel_tol: float = 1e-13

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not (self.beta > 0 and self.beta_max >= self.beta):
            raise ValueError("need 0 < beta <= beta_max")

    @classmethod
    def from_polynomials(cls, p, d, **kwargs):
        return cls(GGPDivisionProblem.from_polynomials(p, d), **kwargs)

    @property
    def r(self):
        return len(self.base.shifts)


class _Structure:
    """Index arrays for the smooth max-plus convolution of a problem."""

    def __init__(self, base: GGPDivisionProblem):
        pairs = base.pairs()
        degrees = list(base.p.keys())
        pos = {j: n for n, j in enumerate(degrees)}
        self.c_idx = np.array([k for k, _, _ in pairs])
        self.d_val = np.array([base.d.coeffs[i] for _, i, _ in pairs])
        self.j_idx = np.array([pos[j] for _, _, j in pairs])
        self.p_val = np.array([base.p.coeffs[j] for j in degrees])
        self.n_c = len(base.shifts)
        self.n_j = len(degrees)
        self.covered = np.zeros(self.n_j, dtype=bool)
        self.covered[self.j_idx] = True


def _smooth_max(values, groups, n_groups, beta):
    """Per-group log-sum-exp of sharpness ``beta`` and its softmax weights."""
    top = np.full(n_groups, -np.inf)
    np.maximum.at(top, groups, values)
    e = np.exp(beta * (values - top[groups]))
    s = np.zeros(n_groups)
    np.add.at(s, groups, e)
    with np.errstate(divide="ignore"):
        out = top + np.log(s) / beta
    return out, e / s[groups]


def smoothed_objective(problem: DirectApproxProblem, y, beta=None, structure=None):
    """Log of the smoothed relaxed objective and its gradient in ``y = log q``.

    The slack and lower-bound variables are eliminated at their optimal
    values (``l_c = q_c``, ``xi_j = max(1, (q (+) d)_j / p_j)``) and each max
    is replaced by a log-sum-exp of sharpness ``beta``. The ``|C|``-th power
    is kept in log space.
    """
    st = structure or _Structure(problem.base)
    beta = problem.beta if beta is None else beta
    y = np.asarray(y, dtype=float)
    q = np.exp(y)
    v = q[st.c_idx] + st.d_val
    m, w = _smooth_max(v, st.j_idx, st.n_j, beta)
    cov = st.covered
    p = st.p_val

    S = np.sum(p ** 2) + np.sum(m[cov] ** 2)
    A = problem.r * np.log(S) - y.sum()
    # smoothed xi_j = softmax_beta(p_j, m_j) / p_j
    hi = np.maximum(p[cov], m[cov])
    lse = hi + np.log(np.exp(beta * (p[cov] - hi)) + np.exp(beta * (m[cov] - hi))) / beta
    xi = np.ones(st.n_j)
    xi[cov] = lse / p[cov]
    sig = np.zeros(st.n_j)
    sig[cov] = 0.5 * (1.0 + np.tanh(0.5 * beta * (m[cov] - p[cov])))
    xi_sum = xi.sum()
    B = np.log(problem.R) + np.log(xi_sum)
    F = np.logaddexp(A, B)

    # d m_j / d y_c accumulated through the softmax weights
    dm_pair = w * q[st.c_idx]
    m_all = np.where(cov, m, 0.0)
    dA = np.zeros(st.n_c)
    np.add.at(dA, st.c_idx, problem.r * 2.0 * m_all[st.j_idx] * dm_pair / S)
    dA -= 1.0
    dB = np.zeros(st.n_c)
    np.add.at(dB, st.c_idx, (sig / p)[st.j_idx] * dm_pair / xi_sum)
    grad = np.exp(A - F) * dA + np.exp(B - F) * dB
    return float(F), grad


@dataclass
class DirectApproxResult:
    quotient: LatticePolynomial
    xi: dict
    objective_trace: list = field(default_factory=list)
    beta_trace: list = field(default_factory=list)
    goal0: float = 0.0
    goal2: float = 0.0
    converged: bool = False

    @property
    def max_xi(self):
        return max(self.xi.values()) if self.xi else 1.0


def _true_objective(problem, q_pos, structure):
    """Log of the unsmoothed relaxed objective at a point of positive coefficients."""
    st = structure
    v = q_pos[st.c_idx] + st.d_val
    conv = np.full(st.n_j, -np.inf)
    np.maximum.at(conv, st.j_idx, v)
    cov = st.covered
    xi = np.ones(st.n_j)
    xi[cov] = np.maximum(1.0, conv[cov] / st.p_val[cov])
    S = np.sum(st.p_val ** 2) + np.sum(conv[cov] ** 2)
    A = problem.r * np.log(S) - np.log(q_pos).sum()
    return float(np.logaddexp(A, np.log(problem.R) + np.log(xi.sum()))), conv, xi


def solve_direct_approx(problem: DirectApproxProblem, init=None) -> DirectApproxResult:
    """Minimise the relaxed objective by gradient descent with backtracking.

    Starts at the erosion quotient unless ``init`` (original-coordinate
    coefficients keyed by shift) is given. The sharpness doubles every
    ``iters_per_beta`` iterations (or on stalling) up to ``beta_max``; since
    the surrogate decreases with sharpness, the recorded objective stays
    monotone across the switch. Returned slacks are recomputed with the true
    max, so the hard constraints hold exactly.
    """
    base = problem.base
    st = _Structure(base)
    P_orig = LatticePolynomial(base.p.dim, {k: v - base.p_shift for k, v in base.p.items()})
    D_orig = LatticePolynomial(base.d.dim, {k: v - base.d_shift for k, v in base.d.items()})
    if init is None:
        init = {c: erode_at(P_orig, D_orig, c)[0] for c in base.shifts}
    q0 = np.array([init[c] + base.offset for c in base.shifts])
    if np.any(q0 <= 0):
        raise ValueError("initial coefficients must be positive after the shift")
    y = np.log(q0)

    beta = problem.beta
    F, g = smoothed_objective(problem, y, beta, st)
    trace, betas = [F], [beta]
    step = 1e-2
    y_prev = g_prev = None
    since_switch = 0
    converged = False
    progress = np.inf
    for it in range(problem.max_iters):
        stalled = np.abs(g).max() < problem.grad_tol or progress < problem.rel_tol
        progress = np.inf
        if stalled or since_switch >= problem.iters_per_beta:
            if beta >= problem.beta_max:
                converged = stalled
                if stalled:
                    break
            else:
                beta = min(2 * beta, problem.beta_max)
                F_new, g = smoothed_objective(problem, y, beta, st)
                if F_new > F + 1e-10 * max(1.0, abs(F)):
                    raise SolverError("objective rose after sharpening", trace)
                F = F_new
                trace.append(F)
                betas.append(beta)
                y_prev = g_prev = None
                since_switch = 0
                continue
        if y_prev is not None:
            s, dg = y - y_prev, g - g_prev
            denom = s @ dg
            if denom > 1e-300:
                step = float(np.clip(s @ s / denom, 1e-12, 1e2))
        t = step
        gg = g @ g
        while True:
            y_try = y - t * g
            F_try, g_try = smoothed_objective(problem, y_try, beta, st)
            if np.isfinite(F_try) and F_try <= F - 1e-4 * t * gg:
                break
            t *= 0.5
            if t < 1e-18:
                break
        if not (np.isfinite(F_try) and F_try <= F):
            # no descent possible at this sharpness
            since_switch = problem.iters_per_beta
            if beta >= problem.beta_max:
                converged = True
                break
            continue
        y_prev, g_prev = y, g
        progress = (F - F_try) / max(1.0, abs(F))
        y, F, g = y_try, F_try, g_try
        trace.append(F)
        betas.append(beta)
        since_switch += 1
    else:
        log.debug("direct approximation hit max_iters=%d", problem.max_iters)

    diffs = np.diff(trace)
    if np.any(diffs > 1e-10 * np.maximum(1.0, np.abs(trace[:-1]))):
        raise SolverError("objective increased between iterations", trace)

    q_pos = np.exp(y)
    goal2, conv, xi = _true_objective(problem, q_pos, st)
    keys = list(base.p.keys())
    quotient = LatticePolynomial(base.p.dim,
                                 {c: q_pos[k] - base.offset for k, c in enumerate(base.shifts)})
    return DirectApproxResult(
        quotient=quotient,
        xi={keys[n]: float(xi[n]) for n in range(st.n_j)},
        objective_trace=trace,
        beta_trace=betas,
        goal0=eval_goal0(quotient, P_orig, D_orig),
        goal2=goal2,
        converged=converged,
    )


def r_sweep(p, d, Rs=(1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6), workers=1, **kwargs):
    """Solve the relaxed program for several ``R``; returns ``(results, best)``.

    ``best`` is the result with the smallest coefficient mismatch (goal 0).
    """
    base = GGPDivisionProblem.from_polynomials(p, d)
    problems = [DirectApproxProblem(base, R=float(R), **kwargs) for R in Rs]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_direct_approx, problems))
    else:
        results = [solve_direct_approx(pr) for pr in problems]
    best = min(range(len(results)), key=lambda k: results[k].goal0)
    return results, results[best]
