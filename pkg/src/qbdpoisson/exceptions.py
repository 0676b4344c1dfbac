"""Exception hierarchy; the CLI maps these onto exit codes."""


class QbdError(Exception):
    """Base class for all errors raised by this package."""


class ModelValidationError(QbdError):
    """Input document or model violates a structural invariant (exit code 1)."""


class ClassificationError(ModelValidationError):
    """An operation was invoked on a chain of the wrong recurrence class."""


class NumericalError(QbdError):
    """Iteration failed to converge or a matrix is numerically singular (exit code 2)."""


class InfeasibleConstraintError(QbdError):
    """The boundary-compatibility constraint has no solution for the requested
    parameters (exit code 3)."""
