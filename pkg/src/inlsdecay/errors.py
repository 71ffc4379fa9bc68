"""Exception hierarchy shared by every module of the toolkit."""


class InlsError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(InlsError, ValueError):
    """Invalid grid, model, weight or solver parameters."""


class SingularEvaluationError(InlsError, ValueError):
    """A coefficient or weight derivative was requested at its singular point."""


class DegenerateInputError(InlsError, ValueError):
    pass


class ShapeError(InlsError, ValueError):
    pass


class NumericalOverflowError(InlsError, FloatingPointError):
    pass


class BoundaryContaminationError(InlsError):
    """Raised when too much mass reaches the outer region of the periodic box."""

    def __init__(self, t, fraction, threshold):
        self.t = t
        self.fraction = fraction
        self.threshold = threshold
        super().__init__(
            f"tail mass fraction {fraction:.3e} exceeds {threshold:.3e} at t={t:.6g}"
        )


class SymmetryPreconditionError(InlsError, ValueError):
    pass


class QueryError(InlsError, ValueError):
    pass


class EigenSolverError(InlsError, RuntimeError):
    def __init__(self, message, bracket=None):
        self.bracket = bracket
        if bracket is not None:
            message = f"{message} (bracket [{bracket[0]:.6e}, {bracket[1]:.6e}])"
        super().__init__(message)


class ParseError(InlsError, ValueError):
    """Config file is missing, malformed, or carries unknown keys."""


class ValidationError(InlsError, ValueError):
    """Config parsed but violates a model or theorem hypothesis."""
