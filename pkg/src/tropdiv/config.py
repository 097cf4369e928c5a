"""Numeric tolerances used across the package.

Comparisons of tropical coefficients go through :func:`atol` so that the
tolerance can be changed in one place, e.g. ``tropdiv.config.set_atol(1e-7)``.
"""

_ATOL = 1e-9
LP_TOL = 1e-10
LP_RESIDUAL_TOL = 1e-8


def atol():
    return _ATOL


def set_atol(value):
    global _ATOL
    if not value > 0:
        raise ValueError("tolerance must be positive")
    _ATOL = float(value)
