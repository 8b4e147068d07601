"""Exception types shared across the package.

The CLI maps ValidationError to exit code 2 and NumericalError to exit
code 3; everything else is a bug and propagates.
"""


class ValidationError(ValueError):
    """Inputs violate a documented precondition or invariant."""


class NumericalError(ArithmeticError):
    """A numerical routine failed in a way that signals a broken upstream
    invariant (e.g. Cholesky failure on a matrix that should be positive
    definite). Never silently recovered."""
