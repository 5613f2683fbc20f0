"""Exception hierarchy shared by the solvers, optimiser and I/O layer."""


class BondheatError(Exception):
    """Base class for all package errors."""


class NonPhysicalResult(BondheatError):
    """A material law left its physical range (e.g. conductivity <= 0)."""


class OutOfRange(BondheatError):
    """Inverse Kirchhoff transform requested beyond the parabola vertex."""


class OutOfDomain(BondheatError):
    """Evaluation point lies outside the compound block or the wire."""


class ConvergenceFailure(BondheatError):
    """An iterative root finder or fixed point did not converge."""


class NoRoot(ConvergenceFailure):
    """A bracketed root search found no sign change."""

    def __init__(self, message, g_lo=None, g_hi=None):
        super().__init__(message)
        self.g_lo = g_lo
        self.g_hi = g_hi


class NewtonDivergence(ConvergenceFailure):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateHessian(BondheatError):
    pass


class SingularReducedSystem(BondheatError):
    pass


class ParseError(BondheatError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnitError(ParseError):
    pass


class NotConverged(ConvergenceFailure):
    """Iteration limit reached; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
