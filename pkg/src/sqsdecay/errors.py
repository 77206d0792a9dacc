"""Exception types shared across the package.

The CLI maps :class:`ModelValidityError` to exit status 2 and
:class:`NumericalError` to exit status 3.
"""


class ModelValidityError(ValueError):
    """Parameters or inputs outside the domain where the model is defined."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to converge or could not certify its result."""
