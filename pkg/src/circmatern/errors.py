"""Exception hierarchy shared by every module."""


class CircMaternError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(CircMaternError, ValueError):
    """A model parameter or argument violates its precondition."""


class NumericalError(CircMaternError, ArithmeticError):
    """A computation cannot be carried out stably (singular, not PSD, ...)."""


class SingularMatrixError(NumericalError):
    pass


class NotPositiveSemidefiniteError(NumericalError):
    pass


class TruncationLimitError(NumericalError):
    """The requested series accuracy needs more terms than the hard cap."""
