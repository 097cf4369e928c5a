"""Exception hierarchy shared by the library and the command line."""


class TropicalError(Exception):
    """Base class for errors raised by tropdiv."""


class DimensionError(TropicalError, ValueError):
    """Operands live in different ambient dimensions."""


class BottomPolynomialError(TropicalError, ValueError):
    """Evaluation of the empty (minus infinity) polynomial."""


class LatticeError(TropicalError, ValueError):
    """A degree vector is not integer-valued where lattice mode needs it."""


class LPNumericalError(TropicalError, ArithmeticError):
    """The simplex routine failed to terminate or lost feasibility."""


class SolverError(TropicalError, RuntimeError):
    """An iterative solver diverged.

    The iterate trace collected up to the failure is kept on ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class DivergenceError(TropicalError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = dict(stats or {})
