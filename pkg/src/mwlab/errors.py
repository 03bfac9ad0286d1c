"""Exception hierarchy shared by all modules.

Validation problems derive from :class:`ValidationError` (a ``ValueError``)
and map to CLI exit code 2; numerical failures derive from
:class:`NumericalError` and map to exit code 3.
"""


class MwlabError(Exception):
    """Base class for all package errors."""


class ValidationError(MwlabError, ValueError):
    """Input violates a documented precondition or invariant."""


class CapacityError(ValidationError):
    """Requested problem size exceeds the configured cap."""


class DegenerateInputError(ValidationError):
    """Input sits on a singular point of a closed-form expression."""


class UnsupportedConfigurationError(ValidationError):
    """Configuration is outside the implemented scope."""


class NumericalError(MwlabError, ArithmeticError):
    """A computation failed to produce a trustworthy result."""


class PoleError(NumericalError):
    """Mean-field trajectory reached the |z| = 1 pole.

    Attributes
    ----------
    partial : object or None
        Trajectory computed up to the point of failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class FitError(NumericalError):
    """Least-squares fit did not converge.

    Attributes
    ----------
    last : object or None
        Parameters of the last iterate.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class NoCrossoverError(NumericalError):
    """Correlation curve never settles into its plateau band."""


class DivergenceError(NumericalError):
    """Closed-form expression evaluated at its pole."""


class ValidityWarning(UserWarning):
    """An approximation is used outside its stated range of validity."""
